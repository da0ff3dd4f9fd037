#pragma once

#include "proxskip/types.hpp"

#include <string>

namespace proxskip {

enum class DenoiserKind
{
  Gaussian,
  Median,
  External
};

std::string to_string(DenoiserKind kind);
DenoiserKind denoiser_kind_from_string(std::string const &name);

/// Plug-and-play denoiser D_sigma.
///
/// Gaussian: separable discrete Gaussian kernel e^-t I_k(t), t = std^2, with
/// std = sigma * pixel_scale pixels, truncated at ceil(3 * std) and
/// renormalised. Tends to the identity as std -> 0.
/// Median: 3x3 median, sigma ignored. External: `command` is run through
/// /bin/sh; it reads one JSON line {"width","height","sigma"} followed by
/// width*height little-endian float64 pixels on stdin and must write the same
/// number of float64 pixels to stdout. All boundaries replicate.
struct DenoiserSpec
{
  DenoiserKind kind = DenoiserKind::Gaussian;
  double sigma = 1.0;
  double pixel_scale = 1.0;
  std::string command;

  void validate() const;
};

Image gaussian_blur(Image const &image, double std_pixels);
Image median3x3(Image const &image);
Image apply_denoiser(Image const &image, DenoiserSpec const &spec);

/// Denoiser strength for a skipped run: sigma_nonskip / sqrt(p).
double skip_sigma(double sigma_nonskip, double p);

} // namespace proxskip
