#pragma once

#include "proxskip/geometry.hpp"

#include <cstdint>
#include <vector>

namespace proxskip {

// Phantom coordinates are normalised: the image spans [-1, 1] in both
// directions, y pointing up.

struct Bubble
{
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};

struct FoamSpec
{
  Index size = 64;
  double cylinder_radius = 0.9;
  int bubble_count = 60;
  double min_bubble_radius = 0.03;
  double max_bubble_radius = 0.12;
  double min_separation = 0.01;
  int max_attempts = 20'000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FoamPhantom
{
  Image image;
  std::vector<Bubble> bubbles;
  /// Set when fewer bubbles than requested fit within the attempt cap.
  bool packing_warning = false;
};

/// Solid cylinder (value 1) with non-overlapping empty bubbles (value 0),
/// placed by seeded rejection sampling. Each bubble lies inside the cylinder
/// and any two satisfy |c_i - c_j| >= r_i + r_j + min_separation.
FoamPhantom foam_phantom(FoamSpec const &spec);

struct Ellipse
{
  double intensity;
  double a; // semi-axis along x before rotation
  double b;
  double x0;
  double y0;
  double phi_degrees;
};

/// Modified Shepp-Logan table (Toft's high-contrast intensities).
std::vector<Ellipse> const &shepp_logan_ellipses();
double shepp_logan_value(double x, double y);
Image shepp_logan(Index size);

struct NoiseSpec
{
  double level = 0.01; // std as a fraction of max |sinogram|
  std::uint64_t seed = 0;
};

/// forward_project(phantom), plus additive Gaussian noise with standard
/// deviation level * max(sinogram).
Sinogram simulate_sinogram(Image const &phantom, ParallelGeometry const &geometry, NoiseSpec const &noise);

/// Ram-Lak filtered back-projection with pi / n_angles angular weighting.
/// Needs uniformly spaced angles on [0, pi).
Image fbp(Sinogram const &sino, Index width, Index height);

} // namespace proxskip
