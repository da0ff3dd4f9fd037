#include "proxskip/pdhg.hpp"

namespace proxskip {

Image run_pdhg_reference(Problem const &problem, PdhgOptions const &options)
{
  if (auto const *tv = std::get_if<TvRegularizer>(&problem.regularizer)) {
    return run_pdhg_reference(*problem.data, tv->config.alpha, tv->config.nonneg, options);
  }
  if (auto const *none = std::get_if<NoRegularizer>(&problem.regularizer)) {
    return run_pdhg_reference(*problem.data, 0.0, none->nonneg, options);
  }
  throw ParameterError("the PDHG reference solver needs a TV or empty regulariser, not a denoiser");
}

Image run_pdhg_reference(LeastSquaresData const &data, double const alpha, bool const nonneg, PdhgOptions const &options)
{
  if (options.n_iterations < 1) { throw ParameterError("PDHG needs at least one iteration"); }
  if (!(alpha >= 0.0)) { throw ParameterError("TV weight must be non-negative"); }
  auto const &A = data.projector();
  SinoMatrix const &b = data.measured();
  Index const h = data.height();
  Index const w = data.width();

  // Preconditioners from the absolute row and column sums of K = [A; D]. The
  // projector weights are non-negative, so |A| 1 = A 1 and |A|^T 1 = A^T 1.
  auto safe_inverse = [](double const s) { return s > 0.0 ? 1.0 / s : 1.0; };
  SinoMatrix const row_a = A.forward(Image::Ones(h, w));
  SinoMatrix const sigma_a = row_a.unaryExpr(safe_inverse);
  Image const col_a = A.adjoint(SinoMatrix::Ones(row_a.rows(), row_a.cols()));
  // Each forward difference row holds one +1 and one -1; boundary rows are empty.
  Image sigma_h = Image::Constant(h, w, 0.5);
  Image sigma_v = Image::Constant(h, w, 0.5);
  sigma_h.col(w - 1).setConstant(1.0);
  sigma_v.row(h - 1).setConstant(1.0);
  Image tau(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      double const col_d = (j > 0) + (j < w - 1) + (i > 0) + (i < h - 1);
      tau(i, j) = safe_inverse(col_a(i, j) + col_d);
    }
  }

  Image x = Image::Zero(h, w);
  Image x_bar = x;
  SinoMatrix y = SinoMatrix::Zero(row_a.rows(), row_a.cols());
  Image zh = Image::Zero(h, w);
  Image zv = Image::Zero(h, w);

  for (int it = 0; it < options.n_iterations; ++it) {
    y = (y + sigma_a.cwiseProduct(A.forward(x_bar) - b)).cwiseQuotient((sigma_a.array() + 1.0).matrix());

    zh += sigma_h.cwiseProduct(forward_diff_h(x_bar));
    zv += sigma_v.cwiseProduct(forward_diff_v(x_bar));
    for (Index k = 0; k < zh.size(); ++k) {
      double const n = std::hypot(zh.data()[k], zv.data()[k]);
      if (n > alpha) {
        double const scale = alpha > 0.0 ? alpha / n : 0.0;
        zh.data()[k] *= scale;
        zv.data()[k] *= scale;
      }
    }

    Image x_next = x - tau.cwiseProduct(A.adjoint(y) + diff_adjoint(zh, zv));
    if (nonneg) { x_next = x_next.cwiseMax(0.0); }
    x_bar = 2.0 * x_next - x;
    x = std::move(x_next);

    if (options.divergence_check_every > 0 && (it + 1) % options.divergence_check_every == 0 && !x.allFinite()) {
      throw DivergenceError(it + 1, 0.0);
    }
    if (options.observer) { options.observer(it + 1, x); }
  }
  if (!x.allFinite()) { throw DivergenceError(options.n_iterations, 0.0); }
  return x;
}

} // namespace proxskip
