#include "proxskip/phantoms.hpp"
#include "proxskip/projector.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace proxskip {

void FoamSpec::validate() const
{
  if (size < 1) { throw ParameterError("foam phantom size must be positive"); }
  if (!(cylinder_radius > 0.0)) { throw ParameterError("cylinder radius must be positive"); }
  if (bubble_count < 0) { throw ParameterError("bubble count must be non-negative"); }
  if (!(min_bubble_radius > 0.0) || !(max_bubble_radius >= min_bubble_radius)) {
    throw ParameterError("bubble radii must satisfy 0 < min <= max");
  }
  if (!(max_bubble_radius < cylinder_radius)) { throw ParameterError("bubbles must fit inside the cylinder"); }
  if (min_separation < 0.0) { throw ParameterError("bubble separation must be non-negative"); }
  if (max_attempts < 1) { throw ParameterError("attempt cap must be positive"); }
}

namespace {

double pixel_x(Index const j, Index const size) { return (2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(size)) - 1.0; }
double pixel_y(Index const i, Index const size) { return 1.0 - (2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(size)); }

} // namespace

FoamPhantom foam_phantom(FoamSpec const &spec)
{
  spec.validate();
  FoamPhantom out;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int attempts = 0;
  while (static_cast<int>(out.bubbles.size()) < spec.bubble_count && attempts < spec.max_attempts) {
    ++attempts;
    double const r = spec.min_bubble_radius + (spec.max_bubble_radius - spec.min_bubble_radius) * unit(rng);
    // Uniform centre in the disc of radius R - r keeps the bubble inside the cylinder.
    double const reach = spec.cylinder_radius - r;
    double const rho = reach * std::sqrt(unit(rng));
    double const phi = 2.0 * std::numbers::pi * unit(rng);
    Bubble const cand{rho * std::cos(phi), rho * std::sin(phi), r};
    bool fits = true;
    for (auto const &b : out.bubbles) {
      if (std::hypot(cand.cx - b.cx, cand.cy - b.cy) < cand.radius + b.radius + spec.min_separation) {
        fits = false;
        break;
      }
    }
    if (fits) { out.bubbles.push_back(cand); }
  }
  out.packing_warning = static_cast<int>(out.bubbles.size()) < spec.bubble_count;

  out.image = Image::Zero(spec.size, spec.size);
  for (Index i = 0; i < spec.size; ++i) {
    double const y = pixel_y(i, spec.size);
    for (Index j = 0; j < spec.size; ++j) {
      double const x = pixel_x(j, spec.size);
      if (std::hypot(x, y) > spec.cylinder_radius) { continue; }
      bool in_bubble = false;
      for (auto const &b : out.bubbles) {
        if (std::hypot(x - b.cx, y - b.cy) <= b.radius) {
          in_bubble = true;
          break;
        }
      }
      out.image(i, j) = in_bubble ? 0.0 : 1.0;
    }
  }
  return out;
}

std::vector<Ellipse> const &shepp_logan_ellipses()
{
  static std::vector<Ellipse> const table{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  return table;
}

double shepp_logan_value(double const x, double const y)
{
  double v = 0.0;
  for (auto const &e : shepp_logan_ellipses()) {
    double const phi = e.phi_degrees * std::numbers::pi / 180.0;
    double const dx = x - e.x0;
    double const dy = y - e.y0;
    double const u = dx * std::cos(phi) + dy * std::sin(phi);
    double const w = -dx * std::sin(phi) + dy * std::cos(phi);
    if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) { v += e.intensity; }
  }
  return v;
}

Image shepp_logan(Index const size)
{
  if (size < 16) { throw ParameterError("Shepp-Logan phantom needs size >= 16"); }
  Image img(size, size);
  for (Index i = 0; i < size; ++i) {
    for (Index j = 0; j < size; ++j) { img(i, j) = shepp_logan_value(pixel_x(j, size), pixel_y(i, size)); }
  }
  return img;
}

Sinogram simulate_sinogram(Image const &phantom, ParallelGeometry const &geometry, NoiseSpec const &noise)
{
  if (noise.level < 0.0) { throw ParameterError("noise level must be non-negative"); }
  Sinogram sino(geometry, forward_project(phantom, geometry));
  if (noise.level == 0.0) { return sino; }
  double const std_dev = noise.level * sino.values.maxCoeff();
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, std_dev);
  for (Index k = 0; k < sino.values.size(); ++k) { sino.values.data()[k] += normal(rng); }
  return sino;
}

Image fbp(Sinogram const &sino, Index const width, Index const height)
{
  auto const &g = sino.geometry;
  if (!g.uniformly_spaced()) { throw ParameterError("FBP is only supported for uniformly spaced angles"); }
  Index const nb = g.n_bins;
  double const d = g.bin_spacing;

  // Spatial Ram-Lak kernel: the band-limited ramp sampled at the bin spacing.
  Eigen::VectorXd kernel(2 * nb - 1);
  for (Index k = -(nb - 1); k <= nb - 1; ++k) {
    double v = 0.0;
    if (k == 0) {
      v = 1.0 / (4.0 * d * d);
    } else if (k % 2 != 0) {
      v = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(k * k) * d * d);
    }
    kernel(k + nb - 1) = v;
  }

  SinoMatrix filtered(g.n_angles(), nb);
  for (Index a = 0; a < g.n_angles(); ++a) {
    for (Index k = 0; k < nb; ++k) {
      double acc = 0.0;
      for (Index j = 0; j < nb; ++j) { acc += sino.values(a, j) * kernel(k - j + nb - 1); }
      filtered(a, k) = d * acc;
    }
  }

  Image out = Image::Zero(height, width);
  double const ps = g.pixel_size;
  double const half_w = 0.5 * static_cast<double>(width - 1);
  double const half_h = 0.5 * static_cast<double>(height - 1);
  double const half_b = 0.5 * static_cast<double>(nb - 1);
  double const weight = std::numbers::pi / static_cast<double>(g.n_angles());
  for (Index a = 0; a < g.n_angles(); ++a) {
    double const c = std::cos(g.angles[static_cast<size_t>(a)]);
    double const s = std::sin(g.angles[static_cast<size_t>(a)]);
    for (Index i = 0; i < height; ++i) {
      double const y = (half_h - static_cast<double>(i)) * ps;
      for (Index j = 0; j < width; ++j) {
        double const x = (static_cast<double>(j) - half_w) * ps;
        double const t = (x * c + y * s) / d + half_b;
        double const t0 = std::floor(t);
        auto const k = static_cast<Index>(t0);
        double const f = t - t0;
        double v = 0.0;
        if (k >= 0 && k < nb) { v += (1.0 - f) * filtered(a, k); }
        if (k + 1 >= 0 && k + 1 < nb) { v += f * filtered(a, k + 1); }
        out(i, j) += weight * v;
      }
    }
  }
  return out;
}

} // namespace proxskip
