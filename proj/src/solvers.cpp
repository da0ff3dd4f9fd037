#include "proxskip/solvers.hpp"
#include "proxskip/clock.hpp"
#include "proxskip/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace proxskip {

double regularizer_value(Regularizer const &reg, Image const &x)
{
  if (auto const *tv = std::get_if<TvRegularizer>(&reg)) { return tv->config.alpha * tv_value(x); }
  return 0.0;
}

void SolverConfig::validate() const
{
  if (!(gamma > 0.0) || !std::isfinite(gamma)) { throw ParameterError("step size gamma must be positive and finite"); }
  if (!(skip_probability > 0.0 && skip_probability <= 1.0)) { throw ParameterError("skip probability must lie in (0, 1]"); }
  if (n_subsets < 1) { throw ParameterError("number of subsets must be at least 1"); }
  if (!(max_data_passes > 0.0)) { throw ParameterError("data-pass budget must be positive"); }
  if (max_iterations < 1) { throw ParameterError("iteration budget must be positive"); }
  if (time_budget && !(*time_budget > 0.0)) { throw ParameterError("time budget must be positive"); }
  if (mu && !(*mu > 0.0)) { throw ParameterError("strong convexity constant must be positive"); }
  if (tolerance < 0.0 || std::isnan(tolerance)) { throw ParameterError("tolerance must be non-negative"); }
}

std::string to_string(StopReason const reason)
{
  switch (reason) {
  case StopReason::Tolerance: return "tolerance";
  case StopReason::DataPasses: return "data_passes";
  case StopReason::Iterations: return "iterations";
  case StopReason::TimeBudget: return "time_budget";
  }
  return "unknown";
}

RunRow const *RunRecord::first_below(double const tol) const
{
  for (auto const &row : rows) {
    if (row.rel_err && *row.rel_err < tol) { return &row; }
  }
  return nullptr;
}

std::string csv_header() { return "data_passes,wall_seconds,rel_err,psnr,ssim,prox_calls,objective"; }

void write_csv(std::ostream &os, RunRecord const &record)
{
  auto put = [&os](std::optional<double> const &v) {
    if (v) {
      std::ostringstream s;
      s << std::setprecision(17) << *v;
      os << s.str();
    }
  };
  os << csv_header() << '\n';
  for (auto const &r : record.rows) {
    put(r.data_passes);
    os << ',';
    put(r.wall_seconds);
    os << ',';
    put(r.rel_err);
    os << ',';
    put(r.psnr);
    os << ',';
    put(r.ssim);
    os << ',' << r.prox_calls << ',';
    put(r.objective);
    os << '\n';
  }
}

DivergenceError::DivergenceError(std::int64_t const k, double const g, RunRecord p)
  : std::runtime_error([&] {
    std::ostringstream s;
    s << "iterate became non-finite at iteration " << k << " with step size gamma = " << g;
    return s.str();
  }())
  , iteration(k)
  , gamma(g)
  , partial(std::move(p))
{
}

IterateState IterateState::initial(Image x0, SolverConfig const &config, Problem const &problem)
{
  if (x0.rows() != problem.height() || x0.cols() != problem.width()) { throw ShapeError("initial image does not match the problem"); }
  IterateState st;
  st.h = Image::Zero(x0.rows(), x0.cols());
  st.estimator = std::make_unique<GradientEstimator>(config.estimator, *problem.data, x0, config.seed);
  st.x = std::move(x0);
  return st;
}

double IterateState::data_passes() const
{
  return static_cast<double>(gradient_full) + (estimator ? estimator->data_passes() : 0.0);
}

Image apply_prox(Problem const &problem, Image const &x, double const tau, IterateState &state)
{
  state.prox_calls += 1;
  return std::visit(
    [&](auto const &reg) -> Image {
      using R = std::decay_t<decltype(reg)>;
      if constexpr (std::is_same_v<R, TvRegularizer>) {
        TvProxResult res = tv_prox(x, tau, reg.config, reg.config.warm_start ? &state.tv_dual : nullptr);
        if (reg.config.warm_start) { state.tv_dual = std::move(res.dual); }
        return std::move(res.image);
      } else if constexpr (std::is_same_v<R, DenoiserRegularizer>) {
        state.denoiser_calls += 1;
        return apply_denoiser(x, reg.spec);
      } else {
        return reg.nonneg ? Image(x.cwiseMax(0.0)) : x;
      }
    },
    problem.regularizer);
}

void proxskip_vr_step(IterateState &state, SolverConfig const &config, Problem const &problem, std::mt19937_64 &skip_rng)
{
  double const gamma = config.gamma;
  double const p = config.skip_probability;

  Image const g = state.estimator->estimate(state.x);
  // x_hat = x - gamma (G - h), kept as u + gamma h with u the plain gradient
  // step, so that the prox argument x_hat - (gamma / p) h = u - gamma (1/p - 1) h
  // reduces to u exactly when p = 1.
  Image const u = state.x - gamma * g;
  Image const x_hat = u + gamma * state.h;

  bool const theta = std::bernoulli_distribution(p)(skip_rng);
  if (theta) {
    double const shift = gamma * (1.0 / p - 1.0);
    Image const arg = shift != 0.0 ? Image(u - shift * state.h) : u;
    state.x = apply_prox(problem, arg, gamma / p, state);
  } else {
    state.x = x_hat;
  }
  state.h += (p / gamma) * (state.x - x_hat);
  state.iteration += 1;
}

namespace {

RunRow measure(std::int64_t const iteration, double const passes, double const cpu, std::int64_t const prox_calls,
               std::int64_t const denoiser_calls, Image const &x, Problem const &problem, RunLogger const &logger)
{
  RunRow row;
  row.iteration = iteration;
  row.data_passes = passes;
  row.wall_seconds = cpu;
  row.prox_calls = prox_calls;
  row.denoiser_calls = denoiser_calls;
  if (logger.reference) { row.rel_err = relative_error_sq(x, *logger.reference); }
  if (logger.ground_truth) {
    row.psnr = psnr(x, *logger.ground_truth, logger.data_range);
    row.ssim = ssim(x, *logger.ground_truth);
  }
  if (logger.objective) { row.objective = problem.objective(x); }
  return row;
}

bool reached(RunRow const &row, double const tolerance)
{
  if (std::isinf(tolerance)) { return true; }
  return row.rel_err && *row.rel_err < tolerance;
}

/// Shared driver: `step` advances the iterate; `passes` reports the cost so far.
template <typename Step, typename Passes, typename Counters>
RunResult drive(SolverConfig const &config, Problem const &problem, RunLogger const &logger, Image const &x,
                double const setup_cpu, Step &&step, Passes &&passes, Counters &&counters)
{
  RunResult result;
  double cpu = setup_cpu;
  std::int64_t iteration = 0;
  std::int64_t logged = 0;
  double const every = logger.log_every > 0.0 ? logger.log_every : 1.0;

  auto log_row = [&] {
    auto const [prox, den] = counters();
    RunRow row = measure(iteration, passes(), cpu, prox, den, x, problem, logger);
    result.record.rows.push_back(row);
    if (logger.on_row) { logger.on_row(row); }
    return row;
  };

  if (reached(log_row(), config.tolerance)) {
    result.x = x;
    result.reason = StopReason::Tolerance;
    return result;
  }

  while (true) {
    double const t0 = thread_cpu_seconds();
    step();
    cpu += thread_cpu_seconds() - t0;
    iteration += 1;
    if (!x.allFinite()) { throw DivergenceError(iteration, config.gamma, result.record); }

    double const done = passes();
    std::optional<StopReason> stop;
    if (done >= config.max_data_passes - 1e-9) {
      stop = StopReason::DataPasses;
    } else if (iteration >= config.max_iterations) {
      stop = StopReason::Iterations;
    } else if (config.time_budget && cpu >= *config.time_budget) {
      stop = StopReason::TimeBudget;
    }

    bool const due = done >= static_cast<double>(logged + 1) * every - 1e-9;
    if (due || stop) {
      while (done >= static_cast<double>(logged + 1) * every - 1e-9) { logged += 1; }
      if (reached(log_row(), config.tolerance)) {
        stop = StopReason::Tolerance;
      }
    }
    if (stop) {
      result.x = x;
      result.reason = *stop;
      return result;
    }
  }
}

} // namespace

RunResult run(SolverConfig const &config, Problem const &problem, Image const &x0, RunLogger const &logger)
{
  config.validate();
  if (config.estimator != EstimatorKind::Full && config.n_subsets != problem.data->n_subsets()) {
    throw ParameterError("config asks for " + std::to_string(config.n_subsets) + " subsets but the problem is split into " +
                         std::to_string(problem.data->n_subsets()));
  }
  // The initial SVRG snapshot gradient is part of the algorithm's cost.
  double const t0 = thread_cpu_seconds();
  IterateState state = IterateState::initial(x0, config, problem);
  double const setup = thread_cpu_seconds() - t0;
  auto skip_rng = make_stream(config.seed, kSkipStream);
  return drive(
    config, problem, logger, state.x, setup, [&] { proxskip_vr_step(state, config, problem, skip_rng); },
    [&] { return state.data_passes(); },
    [&] { return std::pair{state.prox_calls, state.denoiser_calls}; });
}

RunResult run_fista(SolverConfig const &config, Problem const &problem, Image const &x0, RunLogger const &logger)
{
  config.validate();
  IterateState state;
  state.x = x0;
  if (x0.rows() != problem.height() || x0.cols() != problem.width()) { throw ShapeError("initial image does not match the problem"); }
  Image y = x0;
  Image x_prev = x0;
  double t = 1.0;
  double const gamma = config.gamma;

  return drive(
    config, problem, logger, state.x, 0.0,
    [&] {
      Image const g = full_gradient(y, *problem.data);
      state.gradient_full += 1;
      x_prev = state.x;
      state.x = apply_prox(problem, y - gamma * g, gamma, state);
      double const t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = state.x + ((t - 1.0) / t_next) * (state.x - x_prev);
      t = t_next;
      state.iteration += 1;
    },
    [&] { return state.data_passes(); },
    [&] { return std::pair{state.prox_calls, state.denoiser_calls}; });
}

double optimal_p(double const mu, double const lipschitz)
{
  if (!(mu > 0.0) || !(lipschitz > 0.0) || mu > lipschitz) {
    throw ParameterError("optimal_p needs 0 < mu <= L");
  }
  return std::clamp(std::sqrt(mu / lipschitz), std::numeric_limits<double>::min(), 1.0);
}

std::string Algorithm::non_skip_name() const
{
  if (name == "proxskip") { return "ista"; }
  if (skip && name.size() > 4 && name.ends_with("skip")) { return name.substr(0, name.size() - 4); }
  return name;
}

std::vector<std::string> algorithm_names()
{
  return {"ista",     "fista",        "proxskip",  "proxsgd",      "proxsgdskip", "proxsaga",
          "proxsagaskip", "proxsvrg", "proxsvrgskip", "proxlsvrg", "proxlsvrgskip"};
}

Algorithm algorithm_from_name(std::string const &raw)
{
  std::string name;
  for (char const c : raw) { name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c)))); }
  Algorithm a;
  a.name = name;
  if (name == "ista") { return a; }
  if (name == "fista") {
    a.fista = true;
    return a;
  }
  if (name == "proxskip") {
    a.skip = true;
    return a;
  }
  std::string base = name;
  if (base.ends_with("skip")) {
    a.skip = true;
    base = base.substr(0, base.size() - 4);
  }
  if (base == "proxsgd") {
    a.estimator = EstimatorKind::Sgd;
  } else if (base == "proxsaga") {
    a.estimator = EstimatorKind::Saga;
  } else if (base == "proxsvrg") {
    a.estimator = EstimatorKind::Svrg;
  } else if (base == "proxlsvrg") {
    a.estimator = EstimatorKind::Lsvrg;
  } else {
    throw ParameterError("unknown algorithm '" + raw + "'");
  }
  return a;
}

double default_step_size(Algorithm const &algorithm, double const lipschitz)
{
  if (!(lipschitz > 0.0)) { throw ParameterError("Lipschitz constant must be positive"); }
  if (algorithm.fista) { return 1.0 / lipschitz; }
  switch (algorithm.estimator) {
  case EstimatorKind::Full: return 1.99 / lipschitz;
  case EstimatorKind::Saga: return 1.0 / (3.0 * lipschitz);
  default: return 1.0 / lipschitz;
  }
}

RunResult run_algorithm(Algorithm const &algorithm, SolverConfig config, Problem const &problem, Image const &x0,
                        RunLogger const &logger)
{
  config.estimator = algorithm.estimator;
  if (!algorithm.skip) { config.skip_probability = 1.0; }
  if (algorithm.fista) { return run_fista(config, problem, x0, logger); }
  return run(config, problem, x0, logger);
}

} // namespace proxskip
