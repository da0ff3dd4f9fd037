#pragma once

#include "proxskip/types.hpp"

#include <cmath>
#include <functional>
#include <optional>

namespace proxskip {

/// Forward differences with replicate boundary: the last column of the
/// horizontal field and the last row of the vertical field are zero.
template <typename Derived>
auto forward_diff_h(Eigen::MatrixBase<Derived> const &x) -> ImageT<typename Derived::Scalar>
{
  using Scalar = typename Derived::Scalar;
  ImageT<Scalar> d = ImageT<Scalar>::Zero(x.rows(), x.cols());
  if (x.cols() > 1) { d.leftCols(x.cols() - 1) = x.rightCols(x.cols() - 1) - x.leftCols(x.cols() - 1); }
  return d;
}

template <typename Derived>
auto forward_diff_v(Eigen::MatrixBase<Derived> const &x) -> ImageT<typename Derived::Scalar>
{
  using Scalar = typename Derived::Scalar;
  ImageT<Scalar> d = ImageT<Scalar>::Zero(x.rows(), x.cols());
  if (x.rows() > 1) { d.topRows(x.rows() - 1) = x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1); }
  return d;
}

/// Adjoint of (forward_diff_h, forward_diff_v), i.e. minus the discrete divergence.
template <typename DerivedP, typename DerivedQ>
auto diff_adjoint(Eigen::MatrixBase<DerivedP> const &p, Eigen::MatrixBase<DerivedQ> const &q)
  -> ImageT<typename DerivedP::Scalar>
{
  using Scalar = typename DerivedP::Scalar;
  Index const h = p.rows();
  Index const w = p.cols();
  ImageT<Scalar> out = ImageT<Scalar>::Zero(h, w);
  if (w > 1) {
    out.leftCols(w - 1) -= p.leftCols(w - 1);
    out.rightCols(w - 1) += p.leftCols(w - 1);
  }
  if (h > 1) {
    out.topRows(h - 1) -= q.topRows(h - 1);
    out.bottomRows(h - 1) += q.topRows(h - 1);
  }
  return out;
}

/// Isotropic total variation: sum over pixels of the Euclidean norm of the
/// forward-difference gradient.
template <typename Derived>
auto tv_value(Eigen::MatrixBase<Derived> const &x) -> typename Derived::Scalar
{
  auto const dh = forward_diff_h(x);
  auto const dv = forward_diff_v(x);
  return (dh.array().square() + dv.array().square()).sqrt().sum();
}

/// Clip at zero.
template <typename Derived>
auto nonneg_prox(Eigen::MatrixBase<Derived> const &x) -> ImageT<typename Derived::Scalar>
{
  return x.cwiseMax(typename Derived::Scalar(0));
}

struct TvProxConfig
{
  double alpha = 1e-3;
  int inner_iterations = 10;
  bool warm_start = true;
  bool nonneg = true;

  void validate() const;
};

/// FGP dual variables for one image. `weight` records the scaled weight
/// tau * alpha they were computed for.
struct TvDualState
{
  Image p; // horizontal
  Image q; // vertical
  Image r; // momentum copies
  Image s;
  double t = 1.0;
  double weight = 0.0;

  bool empty() const { return p.size() == 0; }
  /// Largest pointwise dual norm sqrt(p^2 + q^2).
  double max_dual_norm() const;
};

struct TvProxResult
{
  Image image;
  TvDualState dual;
};

using TvInnerObserver = std::function<void(int, TvDualState const &)>;

/// Warm state is reused only when its weight matches tau * alpha to 1e-12
/// relative and its shape matches the image.
bool warm_state_compatible(TvDualState const &warm, Image const &image, double weight);

/// prox_{tau * (alpha TV + [x >= 0])}(image) by exactly config.inner_iterations
/// iterations of the fast gradient projection on the dual. The momentum
/// parameter restarts at t = 1 every call; only (p, q) carry over.
TvProxResult tv_prox(Image const &image, double tau, TvProxConfig const &config, TvDualState const *warm = nullptr,
                     TvInnerObserver const &observer = {});

/// 0.5 ||z - x||^2 + weight * TV(z), +inf when nonneg is set and z has a negative entry.
double tv_prox_objective(Image const &z, Image const &x, double weight, bool nonneg);

} // namespace proxskip
