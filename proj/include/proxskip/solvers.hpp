#pragma once

#include "proxskip/denoise.hpp"
#include "proxskip/estimators.hpp"
#include "proxskip/tv.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace proxskip {

/// g = 0, optionally restricted to x >= 0.
struct NoRegularizer
{
  bool nonneg = false;
};

/// g = alpha TV + [x >= 0], prox by warm-started FGP.
struct TvRegularizer
{
  TvProxConfig config;
};

/// Plug-and-play: the prox step is replaced by D_sigma.
struct DenoiserRegularizer
{
  DenoiserSpec spec;
};

using Regularizer = std::variant<NoRegularizer, TvRegularizer, DenoiserRegularizer>;

/// Value of g used for objective reporting. The nonnegativity indicator is
/// left out so skipped (unprojected) iterates stay comparable.
double regularizer_value(Regularizer const &reg, Image const &x);

struct Problem
{
  std::shared_ptr<LeastSquaresData const> data;
  Regularizer regularizer;

  Index width() const { return data->width(); }
  Index height() const { return data->height(); }
  double objective(Image const &x) const { return data->value(x) + regularizer_value(regularizer, x); }
};

struct SolverConfig
{
  double gamma = 1.0;
  double skip_probability = 1.0;
  Index n_subsets = 1;
  EstimatorKind estimator = EstimatorKind::Full;
  double max_data_passes = 200.0;
  std::int64_t max_iterations = std::numeric_limits<std::int64_t>::max();
  double tolerance = 0.0; // on the squared relative error; 0 never stops early
  std::optional<double> time_budget; // CPU seconds
  std::optional<double> mu;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunRow
{
  std::int64_t iteration = 0;
  double data_passes = 0.0;
  double wall_seconds = 0.0;
  std::optional<double> rel_err;
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::int64_t prox_calls = 0;
  std::int64_t denoiser_calls = 0;
  std::optional<double> objective;
};

enum class StopReason
{
  Tolerance,
  DataPasses,
  Iterations,
  TimeBudget
};

std::string to_string(StopReason reason);

struct RunRecord
{
  std::vector<RunRow> rows;

  /// First row whose rel_err is at or below `tol`, if any.
  RunRow const *first_below(double tol) const;
};

/// Columns: data_passes,wall_seconds,rel_err,psnr,ssim,prox_calls,objective.
/// Unavailable values are left empty.
void write_csv(std::ostream &os, RunRecord const &record);
std::string csv_header();

/// What gets measured at each logging event. Metrics are evaluated outside
/// the timed region.
struct RunLogger
{
  std::optional<Image> reference;    // x*, for rel_err and the tolerance stop
  std::optional<Image> ground_truth; // for PSNR and SSIM
  double data_range = 1.0;           // PSNR range
  bool objective = false;
  double log_every = 1.0; // data passes between rows
  std::function<void(RunRow const &)> on_row;
};

struct IterateState
{
  Image x;
  Image h;
  std::unique_ptr<GradientEstimator> estimator;
  TvDualState tv_dual;
  std::int64_t iteration = 0;
  std::int64_t prox_calls = 0;
  std::int64_t denoiser_calls = 0;
  std::int64_t gradient_full = 0; // used when no estimator is attached (FISTA)

  static IterateState initial(Image x0, SolverConfig const &config, Problem const &problem);
  double data_passes() const;
};

struct RunResult
{
  Image x;
  RunRecord record;
  StopReason reason = StopReason::DataPasses;
};

struct DivergenceError : std::runtime_error
{
  DivergenceError(std::int64_t iteration, double gamma, RunRecord partial = {});
  std::int64_t iteration;
  double gamma;
  RunRecord partial;
};

/// Apply the proximal (or denoising) step of `problem` with scale tau.
Image apply_prox(Problem const &problem, Image const &x, double tau, IterateState &state);

/// One iteration of the unified loop: gradient estimate, control-variate
/// corrected step, Bernoulli(p) prox, control-variate update.
void proxskip_vr_step(IterateState &state, SolverConfig const &config, Problem const &problem, std::mt19937_64 &skip_rng);

RunResult run(SolverConfig const &config, Problem const &problem, Image const &x0, RunLogger const &logger = {});

/// FISTA with t_1 = 1; full gradient and a prox of weight gamma every iteration.
RunResult run_fista(SolverConfig const &config, Problem const &problem, Image const &x0, RunLogger const &logger = {});

/// sqrt(mu / L), clamped to (0, 1].
double optimal_p(double mu, double lipschitz);

/// Named algorithms: ista, fista, proxskip, prox{sgd,saga,svrg,lsvrg}[skip].
struct Algorithm
{
  std::string name;
  EstimatorKind estimator = EstimatorKind::Full;
  bool skip = false;
  bool fista = false;

  bool stochastic() const { return estimator != EstimatorKind::Full; }
  /// The same method with the prox applied every iteration.
  std::string non_skip_name() const;
};

Algorithm algorithm_from_name(std::string const &name);
std::vector<std::string> algorithm_names();

/// Default step size for an algorithm given L: 1.99/L for ISTA and ProxSkip,
/// 1/L for FISTA, SVRG, LSVRG and SGD, 1/(3L) for SAGA.
double default_step_size(Algorithm const &algorithm, double lipschitz);

/// Dispatch to run or run_fista.
RunResult run_algorithm(Algorithm const &algorithm, SolverConfig config, Problem const &problem, Image const &x0,
                        RunLogger const &logger = {});

} // namespace proxskip
