#include "proxskip/tv.hpp"

#include <limits>
#include <string>

namespace proxskip {

void TvProxConfig::validate() const
{
  if (!(alpha > 0.0)) { throw ParameterError("TV weight alpha must be positive"); }
  if (inner_iterations < 1) { throw ParameterError("FGP needs at least one inner iteration"); }
}

double TvDualState::max_dual_norm() const
{
  if (empty()) { return 0.0; }
  return (p.array().square() + q.array().square()).sqrt().maxCoeff();
}

bool warm_state_compatible(TvDualState const &warm, Image const &image, double const weight)
{
  if (warm.empty() || warm.p.rows() != image.rows() || warm.p.cols() != image.cols()) { return false; }
  return std::abs(warm.weight - weight) <= 1e-12 * std::abs(weight);
}

namespace {

void project_dual_ball(Image &p, Image &q)
{
  for (Index k = 0; k < p.size(); ++k) {
    double const n = std::hypot(p.data()[k], q.data()[k]);
    if (n > 1.0) {
      p.data()[k] /= n;
      q.data()[k] /= n;
    }
  }
}

} // namespace

TvProxResult tv_prox(Image const &image, double const tau, TvProxConfig const &config, TvDualState const *warm,
                     TvInnerObserver const &observer)
{
  if (!(tau > 0.0)) { throw ParameterError("prox scale tau must be positive, got " + std::to_string(tau)); }
  config.validate();
  double const weight = tau * config.alpha;
  double const step = 1.0 / (8.0 * weight);

  auto primal = [&](Image const &p, Image const &q) -> Image {
    Image x = image - weight * diff_adjoint(p, q);
    if (config.nonneg) { x = x.cwiseMax(0.0); }
    return x;
  };

  TvDualState st;
  st.weight = weight;
  if (config.warm_start && warm != nullptr && warm_state_compatible(*warm, image, weight)) {
    st.p = warm->p;
    st.q = warm->q;
  } else {
    st.p = Image::Zero(image.rows(), image.cols());
    st.q = Image::Zero(image.rows(), image.cols());
  }
  st.r = st.p;
  st.s = st.q;
  st.t = 1.0;

  for (int it = 0; it < config.inner_iterations; ++it) {
    Image const x = primal(st.r, st.s);
    Image p_next = st.r + step * forward_diff_h(x);
    Image q_next = st.s + step * forward_diff_v(x);
    project_dual_ball(p_next, q_next);

    double const t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * st.t * st.t));
    double const beta = (st.t - 1.0) / t_next;
    st.r = p_next + beta * (p_next - st.p);
    st.s = q_next + beta * (q_next - st.q);
    st.p = std::move(p_next);
    st.q = std::move(q_next);
    st.t = t_next;
    if (observer) { observer(it, st); }
  }

  return {primal(st.p, st.q), std::move(st)};
}

double tv_prox_objective(Image const &z, Image const &x, double const weight, bool const nonneg)
{
  if (nonneg && z.minCoeff() < 0.0) { return std::numeric_limits<double>::infinity(); }
  return 0.5 * (z - x).squaredNorm() + weight * tv_value(z);
}

} // namespace proxskip
