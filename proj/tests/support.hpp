#pragma once

#include "proxskip/types.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

using proxskip::Image;
using proxskip::Index;
using proxskip::SinoMatrix;

inline Image random_image(Index h, Index w, std::mt19937_64 &rng, double lo = 0.0, double hi = 1.0)
{
  std::uniform_real_distribution<double> u(lo, hi);
  Image out(h, w);
  for (Index k = 0; k < out.size(); ++k) { out.data()[k] = u(rng); }
  return out;
}

inline SinoMatrix random_sino(Index rows, Index cols, std::mt19937_64 &rng, double lo = 0.0, double hi = 1.0)
{
  std::uniform_real_distribution<double> u(lo, hi);
  SinoMatrix out(rows, cols);
  for (Index k = 0; k < out.size(); ++k) { out.data()[k] = u(rng); }
  return out;
}

inline bool bitwise_equal(Image const &a, Image const &b)
{
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(std::string const &name)
{
  auto dir = std::filesystem::temp_directory_path() / ("proxskip_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace testing
