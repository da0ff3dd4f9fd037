#include "proxskip/metrics.hpp"
#include "proxskip/pdhg.hpp"
#include "proxskip/phantoms.hpp"
#include "proxskip/selfcheck.hpp"
#include "proxskip/solvers.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace proxskip;
using testing::bitwise_equal;

namespace {

std::shared_ptr<LeastSquaresData const> phantom_data(Index n, Index angles, Index subsets, std::uint64_t noise_seed = 1)
{
  auto const g = ParallelGeometry::uniform(angles, static_cast<Index>(std::ceil(n * std::sqrt(2.0))) + 1);
  auto const A = std::make_shared<ParallelProjector const>(g, n, n);
  Sinogram const s = simulate_sinogram(shepp_logan(n), g, {0.01, noise_seed});
  return std::make_shared<LeastSquaresData const>(A, s.values, build_staggered_partition(angles, subsets));
}

Problem tv_problem(std::shared_ptr<LeastSquaresData const> data, double alpha, int inner = 20)
{
  TvProxConfig c;
  c.alpha = alpha;
  c.inner_iterations = inner;
  return {std::move(data), TvRegularizer{c}};
}

/// 1x1 image seen once at angle 0 with unit weight: f(x) = 0.5 (x - b)^2.
Problem scalar_problem(double b)
{
  ParallelGeometry g;
  g.angles = {0.0};
  g.n_bins = 1;
  auto const A = std::make_shared<ParallelProjector const>(g, 1, 1);
  return {std::make_shared<LeastSquaresData const>(A, SinoMatrix::Constant(1, 1, b), build_staggered_partition(1, 1)),
          NoRegularizer{}};
}

PdhgOptions iterations(int n)
{
  PdhgOptions o;
  o.n_iterations = n;
  return o;
}

double lipschitz(Problem const &p) { return operator_norm_sq(p.data->projector(), 200, 0); }

bool same_rows_except_time(RunRecord const &a, RunRecord const &b)
{
  if (a.rows.size() != b.rows.size()) { return false; }
  for (size_t k = 0; k < a.rows.size(); ++k) {
    auto const &r = a.rows[k];
    auto const &s = b.rows[k];
    if (r.iteration != s.iteration || r.data_passes != s.data_passes || r.rel_err != s.rel_err || r.psnr != s.psnr ||
        r.ssim != s.ssim || r.prox_calls != s.prox_calls || r.objective != s.objective) {
      return false;
    }
  }
  return true;
}

} // namespace

TEST_CASE("ProxSkip with p = 1 and the full gradient is proximal gradient")
{
  Problem const p = tv_problem(phantom_data(16, 16, 1), 0.5);
  CHECK(proxskip_ista_deviation(p, 1.0 / lipschitz(p), 40) == 0.0);
}

TEST_CASE("a skipped step from h = 0 is a plain gradient step")
{
  Problem const p = tv_problem(phantom_data(16, 10, 1), 0.2);
  SolverConfig c;
  c.gamma = 1.0 / lipschitz(p);
  c.skip_probability = 1e-12;
  Image const x0 = Image::Constant(16, 16, 0.3);
  IterateState st = IterateState::initial(x0, c, p);
  auto rng = make_stream(0, kSkipStream);
  proxskip_vr_step(st, c, p, rng);
  Image const expected = x0 - c.gamma * full_gradient(x0, *p.data);
  CHECK(bitwise_equal(st.x, expected));
  CHECK((st.h.array() == 0.0).all());
  CHECK(st.prox_calls == 0);
}

TEST_CASE("scalar recursion: with g = 0 every coin sequence gives (1 - gamma)^k")
{
  Problem const p = scalar_problem(0.0);
  for (double gamma : {0.3, 1.0, 1.5}) {
    SolverConfig c;
    c.gamma = gamma;
    c.skip_probability = 0.3;
    c.seed = 17;
    IterateState st = IterateState::initial(Image::Constant(1, 1, 1.0), c, p);
    auto rng = make_stream(c.seed, kSkipStream);
    for (int k = 1; k <= 30; ++k) {
      proxskip_vr_step(st, c, p, rng);
      CHECK(st.x(0, 0) == doctest::Approx(std::pow(1.0 - gamma, k)).epsilon(1e-12).scale(1e-300));
      CHECK(std::abs(st.h(0, 0)) <= 1e-15);
    }
  }
}

TEST_CASE("FISTA")
{
  SUBCASE("scalar quadratic follows the Nesterov recursion")
  {
    Problem const p = scalar_problem(1.0);
    SolverConfig c;
    c.gamma = 0.5;
    c.max_iterations = 20;
    c.max_data_passes = 1e9;
    RunResult const r = run_fista(c, p, Image::Zero(1, 1));
    double x = 0.0;
    double y = 0.0;
    double t = 1.0;
    for (int k = 0; k < 20; ++k) {
      double const x_next = y - c.gamma * (y - 1.0);
      double const t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = x_next + ((t - 1.0) / t_next) * (x_next - x);
      x = x_next;
      t = t_next;
    }
    CHECK(std::abs(r.x(0, 0) - x) <= 1e-12);
    CHECK(r.reason == StopReason::Iterations);
  }
  SUBCASE("first step equals the ISTA step")
  {
    Problem const p = tv_problem(phantom_data(16, 12, 1), 0.3);
    SolverConfig c;
    c.gamma = 1.0 / lipschitz(p);
    c.max_iterations = 1;
    Image const x0 = Image::Constant(16, 16, 0.1);
    CHECK(bitwise_equal(run_fista(c, p, x0).x, run(c, p, x0).x));
  }
  SUBCASE("needs fewer iterations than ISTA at equal step size")
  {
    Problem const p = tv_problem(phantom_data(24, 24, 1), 0.1, 30);
    double const L = lipschitz(p);
    Image const ref = run_pdhg_reference(p, iterations(20'000));
    RunLogger log;
    log.reference = ref;
    SolverConfig c;
    c.gamma = 1.0 / L;
    c.tolerance = 1e-4;
    c.max_data_passes = 5000;
    RunResult const fista = run_fista(c, p, Image::Zero(24, 24), log);
    RunResult const ista = run(c, p, Image::Zero(24, 24), log);
    REQUIRE(fista.reason == StopReason::Tolerance);
    REQUIRE(ista.reason == StopReason::Tolerance);
    CHECK(fista.record.rows.back().iteration < ista.record.rows.back().iteration);
  }
}

TEST_CASE("prox calls follow Binomial(K, p)")
{
  Problem const p = tv_problem(phantom_data(16, 10, 1), 0.2, 5);
  for (double prob : {0.05, 0.2, 0.5}) {
    SolverConfig c;
    c.gamma = 1.0 / lipschitz(p);
    c.skip_probability = prob;
    c.max_iterations = 2000;
    c.max_data_passes = 1e9;
    c.seed = 3;
    RunResult const r = run(c, p, Image::Zero(16, 16));
    double const k = 2000.0;
    double const calls = static_cast<double>(r.record.rows.back().prox_calls);
    CAPTURE(prob);
    CHECK(std::abs(calls - k * prob) <= 3.0 * std::sqrt(k * prob * (1.0 - prob)));
  }
}

TEST_CASE("N = 1 stochastic estimators reproduce the ISTA trajectory")
{
  auto const data = phantom_data(16, 12, 1);
  Problem const p = tv_problem(data, 0.3);
  SolverConfig base;
  base.gamma = 1.0 / lipschitz(p);
  base.max_iterations = 25;
  base.max_data_passes = 1e9;
  Image const x0 = Image::Zero(16, 16);
  Image const ista = run(base, p, x0).x;
  for (auto kind : {EstimatorKind::Sgd, EstimatorKind::Saga, EstimatorKind::Svrg, EstimatorKind::Lsvrg}) {
    SolverConfig c = base;
    c.estimator = kind;
    c.seed = 9;
    CAPTURE(to_string(kind));
    CHECK(bitwise_equal(run(c, p, x0).x, ista));
  }
}

TEST_CASE("stopping and logging")
{
  auto const data = phantom_data(16, 12, 3);
  Problem const p = tv_problem(data, 0.3);
  double const L = lipschitz(p);
  Image const ref = run_pdhg_reference(p, iterations(5000));
  RunLogger log;
  log.reference = ref;
  log.ground_truth = shepp_logan(16);
  log.objective = true;
  SolverConfig c;
  c.gamma = 1.0 / L;
  c.estimator = EstimatorKind::Svrg;
  c.n_subsets = 3;
  c.skip_probability = 0.3;
  c.max_data_passes = 30;
  c.seed = 5;
  Image const x0 = Image::Zero(16, 16);

  SUBCASE("infinite tolerance stops at the initial row")
  {
    SolverConfig d = c;
    d.tolerance = std::numeric_limits<double>::infinity();
    RunResult const r = run(d, p, x0, log);
    CHECK(r.record.rows.size() == 1);
    CHECK(r.reason == StopReason::Tolerance);
    CHECK(bitwise_equal(r.x, x0));
  }
  SUBCASE("deterministic for a fixed seed")
  {
    RunResult const a = run(c, p, x0, log);
    RunResult const b = run(c, p, x0, log);
    CHECK(bitwise_equal(a.x, b.x));
    CHECK(same_rows_except_time(a.record, b.record));
    SolverConfig d = c;
    d.seed = 6;
    CHECK_FALSE(bitwise_equal(run(d, p, x0, log).x, a.x));
  }
  SUBCASE("a tighter tolerance runs at least as long, through the same rows")
  {
    SolverConfig loose = c;
    loose.tolerance = 0.2;
    SolverConfig tight = c;
    tight.tolerance = 0.1;
    RunResult const a = run(loose, p, x0, log);
    RunResult const b = run(tight, p, x0, log);
    REQUIRE(a.reason == StopReason::Tolerance);
    CHECK(b.record.rows.size() >= a.record.rows.size());
    RunRecord prefix;
    prefix.rows.assign(b.record.rows.begin(), b.record.rows.begin() + static_cast<long>(a.record.rows.size()));
    CHECK(same_rows_except_time(prefix, a.record));
    CHECK(a.record.first_below(0.2) == &a.record.rows.back());
  }
  SUBCASE("rows are logged once per data pass with every metric")
  {
    RunResult const r = run(c, p, x0, log);
    CHECK(r.reason == StopReason::DataPasses);
    REQUIRE(r.record.rows.size() >= 30);
    for (size_t k = 1; k < r.record.rows.size(); ++k) {
      auto const &row = r.record.rows[k];
      auto const &prev = r.record.rows[k - 1];
      CHECK(row.iteration > prev.iteration);
      if (k >= 2) { CHECK(std::floor(row.data_passes + 1e-9) > std::floor(prev.data_passes + 1e-9)); }
      CHECK(row.wall_seconds >= prev.wall_seconds);
      CHECK(row.rel_err.has_value());
      CHECK(row.psnr.has_value());
      CHECK(row.ssim.has_value());
      CHECK(row.objective.has_value());
    }
    CHECK(r.record.rows.back().data_passes >= 30.0 - 1e-9);
    std::ostringstream os;
    write_csv(os, r.record);
    std::string const csv = os.str();
    CHECK(csv.rfind(csv_header() + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.record.rows.size()) + 1);
  }
  SUBCASE("iteration and time budgets")
  {
    SolverConfig d = c;
    d.max_iterations = 7;
    CHECK(run(d, p, x0).reason == StopReason::Iterations);
    d = c;
    d.max_data_passes = 1e9;
    d.time_budget = 0.05;
    RunResult const r = run(d, p, x0);
    CHECK(r.reason == StopReason::TimeBudget);
    CHECK(r.record.rows.back().wall_seconds >= 0.05);
  }
  SUBCASE("subset count must match the data")
  {
    SolverConfig d = c;
    d.n_subsets = 4;
    CHECK_THROWS_AS(run(d, p, x0), ParameterError);
  }
}

TEST_CASE("divergence is reported with the iteration and step size")
{
  Problem p = tv_problem(phantom_data(16, 10, 1), 0.1);
  std::get<TvRegularizer>(p.regularizer).config.nonneg = false;
  SolverConfig c;
  c.gamma = 50.0 / lipschitz(p);
  c.max_data_passes = 5000;
  try {
    run(c, p, Image::Constant(16, 16, 0.5));
    FAIL("expected divergence");
  } catch (DivergenceError const &e) {
    CHECK(e.iteration > 0);
    CHECK(e.gamma == c.gamma);
    CHECK_FALSE(e.partial.rows.empty());
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
}

TEST_CASE("solver configuration")
{
  CHECK(optimal_p(1.0, 100.0) == doctest::Approx(0.1));
  CHECK(optimal_p(4.0, 4.0) == 1.0);
  CHECK_THROWS_AS(optimal_p(0.0, 1.0), ParameterError);
  CHECK_THROWS_AS(optimal_p(2.0, 1.0), ParameterError);

  SolverConfig c;
  c.validate();
  for (double bad : {0.0, -0.1, 1.5}) {
    c.skip_probability = bad;
    CHECK_THROWS_AS(c.validate(), ParameterError);
  }
  c = {};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.n_subsets = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);

  CHECK(algorithm_names().size() == 11);
  for (auto const &name : algorithm_names()) { CHECK(algorithm_from_name(name).name == name); }
  CHECK(algorithm_from_name("ProxSVRGSkip").estimator == EstimatorKind::Svrg);
  CHECK(algorithm_from_name("proxsvrgskip").skip);
  CHECK(algorithm_from_name("proxsvrgskip").non_skip_name() == "proxsvrg");
  CHECK(algorithm_from_name("proxskip").non_skip_name() == "ista");
  CHECK(algorithm_from_name("fista").fista);
  CHECK_THROWS_AS(algorithm_from_name("admm"), ParameterError);

  CHECK(default_step_size(algorithm_from_name("ista"), 2.0) == doctest::Approx(0.995));
  CHECK(default_step_size(algorithm_from_name("fista"), 2.0) == doctest::Approx(0.5));
  CHECK(default_step_size(algorithm_from_name("proxsaga"), 2.0) == doctest::Approx(1.0 / 6.0));
  CHECK(default_step_size(algorithm_from_name("proxsvrgskip"), 2.0) == doctest::Approx(0.5));
}

TEST_CASE("run_algorithm applies the prox every iteration for non-skipped methods")
{
  auto const data = phantom_data(16, 10, 2);
  Problem const p = tv_problem(data, 0.2, 5);
  SolverConfig c;
  c.gamma = 1.0 / lipschitz(p);
  c.n_subsets = 2;
  c.skip_probability = 0.1;
  c.max_iterations = 40;
  c.max_data_passes = 1e9;
  RunResult const r = run_algorithm(algorithm_from_name("proxsaga"), c, p, Image::Zero(16, 16));
  CHECK(r.record.rows.back().prox_calls == 40);
}

TEST_CASE("PDHG reference")
{
  SUBCASE("identity operator without regularisation returns the data")
  {
    Index const w = 9;
    ParallelGeometry g;
    g.angles = {0.0};
    g.n_bins = w;
    auto const A = std::make_shared<ParallelProjector const>(g, w, 1);
    CHECK((assemble_dense(g, w, 1) - Eigen::MatrixXd::Identity(w, w)).cwiseAbs().maxCoeff() == 0.0);
    std::mt19937_64 rng(4);
    SinoMatrix const b = testing::random_sino(1, w, rng, -1.0, 1.0);
    LeastSquaresData const data(A, b, build_staggered_partition(1, 1));
    Image const x = run_pdhg_reference(data, 0.0, false, iterations(2000));
    CHECK((x - Image(b)).cwiseAbs().maxCoeff() <= 1e-8);
    Image const xp = run_pdhg_reference(data, 0.0, true, iterations(2000));
    CHECK((xp - Image(b.cwiseMax(0.0))).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("stationary and no worse than ISTA")
  {
    Problem const p = tv_problem(phantom_data(16, 12, 1), 0.3);
    Image const a = run_pdhg_reference(p, iterations(40'000));
    Image const b = run_pdhg_reference(p, iterations(80'000));
    CHECK(relative_error_sq(a, b) <= 1e-9);
    CHECK(a.minCoeff() >= 0.0);

    SolverConfig c;
    c.gamma = 1.0 / lipschitz(p);
    c.max_data_passes = 300;
    Image const ista = run(c, p, Image::Zero(16, 16)).x;
    CHECK(p.objective(b) <= p.objective(ista) + 1e-9 * std::abs(p.objective(ista)));
  }
  SUBCASE("observer sees every iteration")
  {
    Problem const p = tv_problem(phantom_data(16, 6, 1), 0.3);
    int calls = 0;
    int last = 0;
    PdhgOptions o;
    o.n_iterations = 50;
    o.observer = [&](int k, Image const &) {
      calls += 1;
      last = k;
    };
    run_pdhg_reference(p, o);
    CHECK(calls == 50);
    CHECK(last == 50);
  }
}
