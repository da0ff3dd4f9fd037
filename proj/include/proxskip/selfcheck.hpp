#pragma once

#include "proxskip/solvers.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace proxskip {

// Reference implementations written independently of the fast paths: dense
// matrices built entry by entry, plain loops, certified solutions. Used by
// the `validate` subcommand and the test suites.

struct CheckResult
{
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// System matrix from the closed-form interpolation kernel: row (angle, bin),
/// column i * width + j, entry (pixel_size / |c|) * max(0, 1 - |u - j|) for
/// rays stepped along rows (u the fractional column hit on row i), and the
/// transposed rule for rays stepped along columns.
Eigen::MatrixXd projector_matrix_oracle(ParallelGeometry const &geometry, Index width, Index height);

/// max over `pairs` random (x, y) of |<Ax, y> - <x, A^T y>| / |<Ax, y>|.
double adjoint_identity_error(ParallelProjector const &A, int pairs, std::uint64_t seed);

/// Largest relative deviation between the projector (forward and adjoint on
/// random inputs, and its assembled matrix) and projector_matrix_oracle.
double dense_equivalence_error(ParallelGeometry const &geometry, Index width, Index height, std::uint64_t seed);

/// Mean over all subsets i of the estimator at a random state, against the
/// dense-matrix gradient M^T (M x - b). Relative max-norm error.
double estimator_enumeration_error(EstimatorKind kind, Index n_subsets, std::uint64_t seed);

/// Largest deviation (max norm, 0 means bitwise) between ProxSkip with p = 1
/// and the full gradient, and a plain proximal-gradient loop, over `iterations`.
double proxskip_ista_deviation(Problem const &problem, double gamma, int iterations);

/// Largest deviation between every stochastic estimator with N = 1 and the
/// full gradient along a sequence of `iterations` iterates.
double single_subset_deviation(int iterations, std::uint64_t seed);

/// TV prox argmin_x 0.5 ||x - z||^2 + weight TV(x) [+ x >= 0] by ADMM with a
/// dense Cholesky solve. Returns the primal point of the ADMM dual estimate
/// and stops once its duality gap is below `gap_tolerance`, or after 2e5
/// iterations. `gap` receives the final gap (a bound: ||x - x*||^2 <= 2 gap).
Image tv_prox_oracle(Image const &z, double weight, bool nonneg, double gap_tolerance, double *gap = nullptr);

/// Max-norm distance between FGP (2000 inner iterations, cold start) and the
/// dense oracle on every shape 3x3..5x5, each weight in `alphas`, with and
/// without the nonnegativity constraint; inputs uniform on [-0.2, 1].
double tv_prox_oracle_error(std::vector<double> const &alphas, std::uint64_t seed);

double naive_relative_error_sq(Image const &x, Image const &ref);
double naive_psnr(Image const &x, Image const &ref, double data_range);
/// Per-window double loop over the 11x11 Gaussian window (sigma 1.5).
double naive_ssim(Image const &x, Image const &ref);

/// Largest |metric - naive metric| over random image pairs.
double metrics_oracle_error(int pairs, std::uint64_t seed);

/// The fast subset of the above, for `validate`.
std::vector<CheckResult> run_self_checks();

} // namespace proxskip
