#pragma once

#include "proxskip/types.hpp"

#include <cmath>

namespace proxskip {

/// ||x - ref||^2 / ||ref||^2.
template <typename DerivedX, typename DerivedR>
auto relative_error_sq(Eigen::MatrixBase<DerivedX> const &x, Eigen::MatrixBase<DerivedR> const &ref) ->
  typename DerivedX::Scalar
{
  if (x.rows() != ref.rows() || x.cols() != ref.cols()) { throw ShapeError("relative error needs equally shaped images"); }
  auto const denom = ref.squaredNorm();
  if (!(denom > 0)) { throw ParameterError("relative error against an all-zero reference"); }
  return (x - ref).squaredNorm() / denom;
}

inline constexpr double kPsnrCapDb = 300.0;

/// 10 log10(range^2 / MSE), capped at kPsnrCapDb (MSE = 0 gives the cap).
template <typename DerivedX, typename DerivedR>
double psnr(Eigen::MatrixBase<DerivedX> const &x, Eigen::MatrixBase<DerivedR> const &ref, double data_range)
{
  if (x.rows() != ref.rows() || x.cols() != ref.cols()) { throw ShapeError("PSNR needs equally shaped images"); }
  if (!(data_range > 0.0)) { throw ParameterError("PSNR data range must be positive"); }
  double const mse = (x - ref).squaredNorm() / static_cast<double>(x.size());
  if (mse == 0.0) { return kPsnrCapDb; }
  return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

struct SsimParams
{
  int window = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every fully contained Gaussian window (no padding). The
/// dynamic range is max - min of the reference (1 when it is constant).
/// Images smaller than the window fall back to a single global SSIM.
double ssim(Image const &x, Image const &ref, SsimParams const &params = {});

/// SSIM of two images treated as one window with uniform weights.
double global_ssim(Image const &x, Image const &ref, double data_range, SsimParams const &params = {});

} // namespace proxskip
