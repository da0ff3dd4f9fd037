#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace proxskip {

using Index = Eigen::Index;

/// Row-major pixel grid: rows() is the image height, cols() the width.
template <typename Scalar>
using ImageT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Image = ImageT<double>;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Angle-major measurement block: one row per projection angle, one column per bin.
using SinoMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DenoiserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace proxskip
