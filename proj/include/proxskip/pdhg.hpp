#pragma once

#include "proxskip/solvers.hpp"

#include <functional>

namespace proxskip {

struct PdhgOptions
{
  int n_iterations = 50'000;
  /// Called after every iteration with (iteration count, primal iterate).
  std::function<void(int, Image const &)> observer;
  int divergence_check_every = 100;
};

/// Reference solver for 0.5 ||Ax - b||^2 + alpha TV(x) [+ indicator(x >= 0)].
///
/// Primal-dual hybrid gradient on the stacked operator K = [A; D] (D the
/// forward-difference gradient) with the diagonal preconditioners
/// sigma_j = 1 / sum_i |K_ji| and tau_i = 1 / sum_j |K_ji|, which need no
/// operator-norm estimate. alpha and nonnegativity come from the problem's
/// TvRegularizer; a NoRegularizer means alpha = 0.
Image run_pdhg_reference(Problem const &problem, PdhgOptions const &options = {});

/// Same solver with explicit parameters (alpha = 0 allowed).
Image run_pdhg_reference(LeastSquaresData const &data, double alpha, bool nonneg, PdhgOptions const &options = {});

} // namespace proxskip
