#include "proxskip/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace proxskip {

ParallelGeometry ParallelGeometry::uniform(Index const n_angles, Index const n_bins, double const bin_spacing, double const pixel_size)
{
  if (n_angles < 1) { throw ParameterError("geometry needs at least one angle"); }
  ParallelGeometry g;
  g.angles.resize(static_cast<size_t>(n_angles));
  for (Index a = 0; a < n_angles; ++a) {
    g.angles[static_cast<size_t>(a)] = std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles);
  }
  g.n_bins = n_bins;
  g.bin_spacing = bin_spacing;
  g.pixel_size = pixel_size;
  g.validate();
  return g;
}

void ParallelGeometry::validate() const
{
  if (angles.empty()) { throw ParameterError("geometry needs at least one angle"); }
  if (n_bins < 1) { throw ParameterError("geometry needs at least one detector bin"); }
  if (!(bin_spacing > 0.0) || !(pixel_size > 0.0)) { throw ParameterError("bin_spacing and pixel_size must be positive"); }
  for (size_t i = 0; i < angles.size(); ++i) {
    if (!std::isfinite(angles[i])) { throw ParameterError("non-finite projection angle"); }
    if (i > 0 && !(angles[i] > angles[i - 1])) {
      throw ParameterError("projection angles must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

bool ParallelGeometry::uniformly_spaced(double const rel_tol) const
{
  if (angles.size() < 2) { return true; }
  double const step = std::numbers::pi / static_cast<double>(angles.size());
  for (size_t i = 0; i < angles.size(); ++i) {
    double const expected = angles.front() + step * static_cast<double>(i);
    if (std::abs(angles[i] - expected) > rel_tol * std::numbers::pi) { return false; }
  }
  return true;
}

bool operator==(ParallelGeometry const &a, ParallelGeometry const &b)
{
  return a.angles == b.angles && a.n_bins == b.n_bins && a.bin_spacing == b.bin_spacing && a.pixel_size == b.pixel_size;
}

Sinogram::Sinogram(ParallelGeometry g, SinoMatrix v)
  : geometry(std::move(g))
  , values(std::move(v))
{
  if (values.rows() != geometry.n_angles() || values.cols() != geometry.n_bins) {
    throw ShapeError("sinogram values do not match geometry: got " + std::to_string(values.rows()) + "x" +
                     std::to_string(values.cols()) + ", expected " + std::to_string(geometry.n_angles()) + "x" +
                     std::to_string(geometry.n_bins));
  }
}

Sinogram::Sinogram(ParallelGeometry g)
  : geometry(std::move(g))
  , values(SinoMatrix::Zero(geometry.n_angles(), geometry.n_bins))
{
}

SubsetPartition::SubsetPartition(Index const n_angles, Index const n_subsets)
  : n_angles_(n_angles)
{
  if (n_subsets < 1 || n_subsets > n_angles) {
    throw ParameterError("number of subsets must lie in [1, n_angles]; got " + std::to_string(n_subsets) + " for " +
                         std::to_string(n_angles) + " angles");
  }
  subsets_.resize(static_cast<size_t>(n_subsets));
  for (Index k = 0; k < n_subsets; ++k) {
    for (Index a = k; a < n_angles; a += n_subsets) { subsets_[static_cast<size_t>(k)].push_back(a); }
  }
}

std::span<Index const> SubsetPartition::subset(Index const k) const
{
  if (k < 0 || k >= n_subsets()) { throw ParameterError("subset index out of range: " + std::to_string(k)); }
  return subsets_[static_cast<size_t>(k)];
}

SubsetPartition build_staggered_partition(Index const n_angles, Index const n_subsets)
{
  return SubsetPartition(n_angles, n_subsets);
}

SinoMatrix restrict_rows(SinoMatrix const &full, std::span<Index const> angle_rows)
{
  SinoMatrix out(static_cast<Index>(angle_rows.size()), full.cols());
  for (size_t r = 0; r < angle_rows.size(); ++r) {
    Index const a = angle_rows[r];
    if (a < 0 || a >= full.rows()) { throw ShapeError("angle index out of range"); }
    out.row(static_cast<Index>(r)) = full.row(a);
  }
  return out;
}

} // namespace proxskip
