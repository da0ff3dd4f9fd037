#include "proxskip/projector.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace proxskip {

ParallelProjector::ParallelProjector(ParallelGeometry geometry, Index const width, Index const height)
  : geometry_(std::move(geometry))
  , width_(width)
  , height_(height)
{
  geometry_.validate();
  if (width_ < 1 || height_ < 1) { throw ShapeError("image grid must be at least 1x1"); }
  if (width_ * height_ > std::numeric_limits<std::int32_t>::max()) { throw ShapeError("image grid too large"); }
  row_start_.reserve(static_cast<size_t>(geometry_.n_rays() + 1));
  row_start_.push_back(0);
  for (Index a = 0; a < geometry_.n_angles(); ++a) {
    for (Index b = 0; b < geometry_.n_bins; ++b) {
      trace(a, b);
      row_start_.push_back(static_cast<Index>(weights_.size()));
    }
  }
}

void ParallelProjector::trace(Index const angle, Index const bin)
{
  double const theta = geometry_.angles[static_cast<size_t>(angle)];
  double const c = std::cos(theta);
  double const s = std::sin(theta);
  double const offset = geometry_.bin_offset(bin);
  double const ps = geometry_.pixel_size;
  double const half_w = 0.5 * static_cast<double>(width_ - 1);
  double const half_h = 0.5 * static_cast<double>(height_ - 1);

  auto emit = [&](Index const row, Index const col, double const w) {
    if (w != 0.0) {
      pixels_.push_back(static_cast<std::int32_t>(row * width_ + col));
      weights_.push_back(w);
    }
  };

  // Ray: x cos + y sin = offset. Step along whichever axis the ray is closer
  // to, interpolating linearly along the other one.
  if (std::abs(c) >= std::abs(s)) {
    double const w = ps / std::abs(c);
    for (Index i = 0; i < height_; ++i) {
      double const y = (half_h - static_cast<double>(i)) * ps;
      double const x = (offset - y * s) / c;
      double const col = x / ps + half_w;
      double const j0 = std::floor(col);
      double const f = col - j0;
      auto const j = static_cast<Index>(j0);
      if (j >= 0 && j < width_) { emit(i, j, w * (1.0 - f)); }
      if (j + 1 >= 0 && j + 1 < width_) { emit(i, j + 1, w * f); }
    }
  } else {
    double const w = ps / std::abs(s);
    for (Index j = 0; j < width_; ++j) {
      double const x = (static_cast<double>(j) - half_w) * ps;
      double const y = (offset - x * c) / s;
      double const row = half_h - y / ps;
      double const i0 = std::floor(row);
      double const f = row - i0;
      auto const i = static_cast<Index>(i0);
      if (i >= 0 && i < height_) { emit(i, j, w * (1.0 - f)); }
      if (i + 1 >= 0 && i + 1 < height_) { emit(i + 1, j, w * f); }
    }
  }
}

void ParallelProjector::check_image(Image const &image) const
{
  if (image.rows() != height_ || image.cols() != width_) {
    throw ShapeError("image is " + std::to_string(image.cols()) + "x" + std::to_string(image.rows()) +
                     ", projector expects " + std::to_string(width_) + "x" + std::to_string(height_));
  }
}

SinoMatrix ParallelProjector::forward(Image const &image) const
{
  std::vector<Index> all(static_cast<size_t>(geometry_.n_angles()));
  std::iota(all.begin(), all.end(), Index{0});
  return forward(image, all);
}

SinoMatrix ParallelProjector::forward(Image const &image, std::span<Index const> angles) const
{
  check_image(image);
  Index const nb = geometry_.n_bins;
  SinoMatrix out(static_cast<Index>(angles.size()), nb);
  double const *px = image.data();
  for (size_t r = 0; r < angles.size(); ++r) {
    Index const a = angles[r];
    if (a < 0 || a >= geometry_.n_angles()) { throw ShapeError("angle index out of range: " + std::to_string(a)); }
    for (Index b = 0; b < nb; ++b) {
      Index const ray = a * nb + b;
      double acc = 0.0;
      for (Index k = row_start_[static_cast<size_t>(ray)]; k < row_start_[static_cast<size_t>(ray + 1)]; ++k) {
        acc += weights_[static_cast<size_t>(k)] * px[pixels_[static_cast<size_t>(k)]];
      }
      out(static_cast<Index>(r), b) = acc;
    }
  }
  return out;
}

Image ParallelProjector::adjoint(SinoMatrix const &sino) const
{
  std::vector<Index> all(static_cast<size_t>(geometry_.n_angles()));
  std::iota(all.begin(), all.end(), Index{0});
  return adjoint(sino, all);
}

Image ParallelProjector::adjoint(SinoMatrix const &slice, std::span<Index const> angles) const
{
  Image out = Image::Zero(height_, width_);
  adjoint_accumulate(slice, angles, out);
  return out;
}

void ParallelProjector::adjoint_accumulate(SinoMatrix const &slice, std::span<Index const> angles, Image &out) const
{
  check_image(out);
  Index const nb = geometry_.n_bins;
  if (slice.rows() != static_cast<Index>(angles.size()) || slice.cols() != nb) {
    throw ShapeError("sinogram slice is " + std::to_string(slice.rows()) + "x" + std::to_string(slice.cols()) +
                     ", expected " + std::to_string(angles.size()) + "x" + std::to_string(nb));
  }
  double *px = out.data();
  for (size_t r = 0; r < angles.size(); ++r) {
    Index const a = angles[r];
    if (a < 0 || a >= geometry_.n_angles()) { throw ShapeError("angle index out of range: " + std::to_string(a)); }
    for (Index b = 0; b < nb; ++b) {
      double const y = slice(static_cast<Index>(r), b);
      Index const ray = a * nb + b;
      for (Index k = row_start_[static_cast<size_t>(ray)]; k < row_start_[static_cast<size_t>(ray + 1)]; ++k) {
        px[pixels_[static_cast<size_t>(k)]] += weights_[static_cast<size_t>(k)] * y;
      }
    }
  }
}

SinoMatrix forward_project(Image const &image, ParallelGeometry const &geometry, std::optional<std::span<Index const>> subset)
{
  ParallelProjector const A(geometry, image.cols(), image.rows());
  return subset ? A.forward(image, *subset) : A.forward(image);
}

Image back_project(SinoMatrix const &sino, ParallelGeometry const &geometry, Index const width, Index const height,
                   std::optional<std::span<Index const>> subset)
{
  ParallelProjector const A(geometry, width, height);
  return subset ? A.adjoint(sino, *subset) : A.adjoint(sino);
}

double operator_norm_sq(ParallelProjector const &A, int const iterations, std::uint64_t const seed)
{
  if (iterations < 1) { throw ParameterError("power method needs at least one iteration"); }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto draw = [&] {
    Image v(A.height(), A.width());
    for (Index i = 0; i < v.size(); ++i) { v.data()[i] = normal(rng); }
    return v;
  };

  Image v = draw();
  for (int attempt = 0; v.norm() == 0.0 && attempt < 8; ++attempt) { v = draw(); }
  v /= v.norm();
  for (int it = 0; it < iterations; ++it) {
    Image w = A.adjoint(A.forward(v));
    double const n = w.norm();
    if (n == 0.0) {
      // v landed in the null space; restart from a fresh direction.
      v = draw();
      v /= v.norm();
      continue;
    }
    v = w / n;
  }
  return A.forward(v).squaredNorm();
}

double operator_norm_sq(ParallelGeometry const &geometry, Index const width, Index const height, int const iterations,
                        std::uint64_t const seed)
{
  return operator_norm_sq(ParallelProjector(geometry, width, height), iterations, seed);
}

Eigen::MatrixXd assemble_dense(ParallelGeometry const &geometry, Index const width, Index const height, Index const cap)
{
  Index const n_pixels = width * height;
  if (n_pixels * geometry.n_rays() > cap) {
    throw ParameterError("dense assembly of " + std::to_string(geometry.n_rays()) + "x" + std::to_string(n_pixels) +
                         " exceeds the entry cap of " + std::to_string(cap));
  }
  ParallelProjector const A(geometry, width, height);
  Eigen::MatrixXd dense(geometry.n_rays(), n_pixels);
  Image unit = Image::Zero(height, width);
  for (Index j = 0; j < n_pixels; ++j) {
    unit.data()[j] = 1.0;
    SinoMatrix const col = A.forward(unit);
    dense.col(j) = col.reshaped<Eigen::RowMajor>();
    unit.data()[j] = 0.0;
  }
  return dense;
}

} // namespace proxskip
