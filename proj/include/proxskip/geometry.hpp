#pragma once

#include "proxskip/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace proxskip {

/// 2D parallel-beam acquisition. The detector is centred on the rotation
/// axis; bin b sits at signed offset (b - (n_bins - 1) / 2) * bin_spacing.
struct ParallelGeometry
{
  std::vector<double> angles; // radians, strictly increasing in [0, pi)
  Index n_bins = 1;
  double bin_spacing = 1.0;
  double pixel_size = 1.0;

  Index n_angles() const { return static_cast<Index>(angles.size()); }
  Index n_rays() const { return n_angles() * n_bins; }
  double bin_offset(Index bin) const { return (static_cast<double>(bin) - 0.5 * static_cast<double>(n_bins - 1)) * bin_spacing; }

  /// n_angles uniformly spaced angles k * pi / n_angles.
  static ParallelGeometry uniform(Index n_angles, Index n_bins, double bin_spacing = 1.0, double pixel_size = 1.0);

  /// Throws ParameterError when an invariant is violated.
  void validate() const;
  bool uniformly_spaced(double rel_tol = 1e-9) const;
};

bool operator==(ParallelGeometry const &a, ParallelGeometry const &b);

struct Sinogram
{
  ParallelGeometry geometry;
  SinoMatrix values; // n_angles x n_bins

  Sinogram() = default;
  Sinogram(ParallelGeometry g, SinoMatrix v);
  explicit Sinogram(ParallelGeometry g);
};

/// Staggered split of the projection angles: subset k holds {k, k+N, k+2N, ...}.
class SubsetPartition
{
public:
  SubsetPartition() = default;
  SubsetPartition(Index n_angles, Index n_subsets);

  Index n_subsets() const { return static_cast<Index>(subsets_.size()); }
  Index n_angles() const { return n_angles_; }
  std::span<Index const> subset(Index k) const;
  std::vector<std::vector<Index>> const &subsets() const { return subsets_; }

private:
  Index n_angles_ = 0;
  std::vector<std::vector<Index>> subsets_;
};

SubsetPartition build_staggered_partition(Index n_angles, Index n_subsets);

/// Gather the listed angle rows of a full sinogram.
SinoMatrix restrict_rows(SinoMatrix const &full, std::span<Index const> angle_rows);

} // namespace proxskip
