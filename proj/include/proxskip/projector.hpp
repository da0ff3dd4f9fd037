#pragma once

#include "proxskip/geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace proxskip {

/// Ray-driven parallel-beam projector with Joseph (linear interpolation)
/// sampling. One ray per detector bin through the bin centre; the image grid
/// is centred on the rotation axis and everything outside it is zero.
///
/// Ray weights are traced once at construction and stored row-compressed,
/// so forward and adjoint share exactly the same kernel. Each output entry is
/// accumulated in a fixed order, which keeps results bitwise reproducible.
class ParallelProjector
{
public:
  ParallelProjector(ParallelGeometry geometry, Index width, Index height);

  ParallelGeometry const &geometry() const { return geometry_; }
  Index width() const { return width_; }
  Index height() const { return height_; }
  Index n_pixels() const { return width_ * height_; }
  Index nnz() const { return static_cast<Index>(weights_.size()); }

  /// A x over all angles.
  SinoMatrix forward(Image const &image) const;
  /// A_S x: only the listed angle rows, in the listed order.
  SinoMatrix forward(Image const &image, std::span<Index const> angles) const;

  /// A^T y over all angles.
  Image adjoint(SinoMatrix const &sino) const;
  /// A_S^T y_S, where row r of `slice` belongs to angle angles[r].
  Image adjoint(SinoMatrix const &slice, std::span<Index const> angles) const;
  /// Accumulate A_S^T y_S into `out` (no zeroing).
  void adjoint_accumulate(SinoMatrix const &slice, std::span<Index const> angles, Image &out) const;

private:
  void check_image(Image const &image) const;
  void trace(Index angle, Index bin);

  ParallelGeometry geometry_;
  Index width_;
  Index height_;
  std::vector<Index> row_start_; // n_rays + 1
  std::vector<std::int32_t> pixels_;
  std::vector<double> weights_;
};

SinoMatrix forward_project(Image const &image, ParallelGeometry const &geometry,
                           std::optional<std::span<Index const>> subset = std::nullopt);
Image back_project(SinoMatrix const &sino, ParallelGeometry const &geometry, Index width, Index height,
                   std::optional<std::span<Index const>> subset = std::nullopt);

/// Power-method estimate of sigma_max(A)^2, i.e. the Lipschitz constant of
/// the gradient of 0.5 * ||Ax - b||^2.
double operator_norm_sq(ParallelProjector const &A, int iterations, std::uint64_t seed);
double operator_norm_sq(ParallelGeometry const &geometry, Index width, Index height, int iterations, std::uint64_t seed);

inline constexpr Index kDenseEntryCap = 10'000'000;

/// Dense n_rays x n_pixels matrix whose column j is A applied to the j-th unit
/// image. Test oracle only; refuses beyond `cap` entries.
Eigen::MatrixXd assemble_dense(ParallelGeometry const &geometry, Index width, Index height, Index cap = kDenseEntryCap);

} // namespace proxskip
