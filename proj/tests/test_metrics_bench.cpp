#include "proxskip/bench.hpp"
#include "proxskip/metrics.hpp"
#include "proxskip/pdhg.hpp"
#include "proxskip/phantoms.hpp"
#include "proxskip/selfcheck.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace proxskip;
using testing::random_image;

namespace {

std::vector<std::vector<std::string>> parse_csv(std::string const &text)
{
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) { cells.push_back(cell); }
    if (!line.empty() && line.back() == ',') { cells.emplace_back(); }
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(std::filesystem::path const &p)
{
  std::ifstream f(p);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

SweepContext small_context()
{
  SweepContext ctx;
  auto const g = ParallelGeometry::uniform(16, 24);
  ctx.projector = std::make_shared<ParallelProjector const>(g, 16, 16);
  Image const truth = shepp_logan(16);
  ctx.measured = simulate_sinogram(truth, g, {0.01, 2}).values;
  TvProxConfig tv;
  tv.alpha = 0.3;
  ctx.regularizer = TvRegularizer{tv};
  LeastSquaresData const data(ctx.projector, ctx.measured, build_staggered_partition(16, 1));
  PdhgOptions o;
  o.n_iterations = 5000;
  ctx.reference = run_pdhg_reference(data, 0.3, true, o);
  ctx.ground_truth = truth;
  ctx.lipschitz = operator_norm_sq(*ctx.projector, 200, 0);
  ctx.x0 = Image::Zero(16, 16);
  ctx.stopping.tolerance = 0.0;
  ctx.stopping.max_data_passes = 20;
  return ctx;
}

} // namespace

TEST_CASE("relative error")
{
  Image ref(2, 2);
  ref << 1.0, 2.0, 3.0, 4.0;
  CHECK(relative_error_sq(ref, ref) == 0.0);
  CHECK(relative_error_sq(Image(Image::Zero(2, 2)), ref) == 1.0);
  CHECK(relative_error_sq(Image(2.0 * ref), ref) == 1.0);
  CHECK(relative_error_sq(Image(ref + Image::Constant(2, 2, 1.0)), ref) == doctest::Approx(4.0 / 30.0));
  CHECK_THROWS_AS(relative_error_sq(ref, Image(Image::Zero(2, 2))), ParameterError);
  CHECK_THROWS_AS(relative_error_sq(ref, Image(Image::Zero(2, 3))), ShapeError);
  ImageT<float> const rf = ref.cast<float>();
  CHECK(relative_error_sq(rf, rf) == 0.0f);
}

TEST_CASE("PSNR")
{
  Image const ref = Image::Zero(2, 2);
  Image x = ref;
  CHECK(psnr(x, ref, 1.0) == kPsnrCapDb);
  x(0, 0) = 1.0;
  CHECK(psnr(x, ref, 1.0) == doctest::Approx(10.0 * std::log10(4.0)));
  CHECK(psnr(x, ref, 2.0) == doctest::Approx(10.0 * std::log10(16.0)));
  CHECK_THROWS_AS(psnr(x, ref, 0.0), ParameterError);
  CHECK_THROWS_AS(psnr(x, Image(Image::Zero(3, 2)), 1.0), ShapeError);
}

TEST_CASE("SSIM")
{
  std::mt19937_64 rng(1);
  Image const a = random_image(30, 25, rng);
  Image const b = random_image(30, 25, rng);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) <= 1e-12);
  CHECK(ssim(a, b) < 0.5);
  CHECK(ssim(Image(a + 0.01 * b), a) > ssim(Image(a + 0.1 * b), a));

  SUBCASE("images smaller than the window use one global window")
  {
    Image const s = random_image(5, 6, rng);
    Image const t = random_image(5, 6, rng);
    CHECK(ssim(s, t) == global_ssim(s, t, t.maxCoeff() - t.minCoeff()));
    CHECK(ssim(s, s) == doctest::Approx(1.0));
  }
  SUBCASE("constant reference uses unit range")
  {
    Image const c = Image::Constant(12, 12, 0.5);
    Image const d = random_image(12, 12, rng);
    SsimParams p;
    double const c1 = p.k1 * p.k1;
    double const c2 = p.k2 * p.k2;
    CHECK(std::isfinite(ssim(d, c)));
    CHECK(ssim(c, c) == doctest::Approx(((2 * 0.25 + c1) * c2) / ((0.5 + c1) * c2)));
  }
  CHECK_THROWS_AS(ssim(a, Image(Image::Zero(3, 3))), ShapeError);
}

TEST_CASE("metrics agree with the naive reference loops")
{
  CHECK(metrics_oracle_error(6, 21) <= 1e-10);
  std::mt19937_64 rng(2);
  Image const x = random_image(20, 17, rng);
  Image const r = random_image(20, 17, rng);
  CHECK(relative_error_sq(x, r) == doctest::Approx(naive_relative_error_sq(x, r)).epsilon(1e-13));
  CHECK(psnr(x, r, 1.0) == doctest::Approx(naive_psnr(x, r, 1.0)).epsilon(1e-13));
}

TEST_CASE("stopping rule and grid validation")
{
  StoppingRule s;
  s.validate();
  s.max_data_passes = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s.time_budget = 10.0;
  s.validate();
  s.tolerance = -1.0;
  CHECK_THROWS_AS(s.validate(), ParameterError);

  SweepGrid g;
  g.validate();
  g.probabilities = {0.0};
  CHECK_THROWS_AS(g.validate(), ParameterError);
  g = {};
  g.algorithms.clear();
  CHECK_THROWS_AS(g.validate(), ParameterError);
  g = {};
  g.repetitions = 3;
  CHECK(g.seed_list() == std::vector<std::uint64_t>{0, 1, 2});
  g.seeds = {7, 9};
  CHECK(g.seed_list() == std::vector<std::uint64_t>{7, 9});
}

TEST_CASE("grid expansion")
{
  SweepGrid g;
  g.algorithms = {"ista", "proxskip", "proxsvrg", "proxsvrgskip"};
  g.n_subsets = {2, 5};
  g.probabilities = {0.1, 0.5};
  g.inner_iterations = {10};
  g.repetitions = 2;
  auto const cells = expand_grid(g);
  auto count = [&](std::string const &name) {
    return std::count_if(cells.begin(), cells.end(), [&](SweepCell const &c) { return c.algorithm == name; });
  };
  CHECK(count("ista") == 2);
  CHECK(count("proxskip") == 4);
  CHECK(count("proxsvrg") == 4);
  CHECK(count("proxsvrgskip") == 8);
  for (auto const &c : cells) {
    if (c.algorithm == "ista" || c.algorithm == "proxskip") { CHECK(c.n_subsets == 1); }
    if (c.algorithm == "ista" || c.algorithm == "proxsvrg") { CHECK(c.p == 1.0); }
  }
  CHECK(SweepCell{"proxsvrgskip", 10, 0.1, 5, 3}.label() == "proxsvrgskip_N10_p0.1_inner5_seed3");
}

TEST_CASE("cell problems")
{
  SweepContext ctx;
  ctx.projector = std::make_shared<ParallelProjector const>(ParallelGeometry::uniform(8, 6), 4, 4);
  ctx.measured = SinoMatrix::Zero(8, 6);
  ctx.regularizer = TvRegularizer{};
  Problem const tv = cell_problem(ctx, {"proxsvrgskip", 4, 0.2, 17, 0});
  CHECK(std::get<TvRegularizer>(tv.regularizer).config.inner_iterations == 17);
  CHECK(tv.data->n_subsets() == 4);

  DenoiserSpec d;
  d.sigma = 0.5;
  ctx.regularizer = DenoiserRegularizer{d};
  CHECK(std::get<DenoiserRegularizer>(cell_problem(ctx, {"proxskip", 1, 0.25, 1, 0}).regularizer).spec.sigma ==
        doctest::Approx(1.0));
  CHECK(std::get<DenoiserRegularizer>(cell_problem(ctx, {"ista", 1, 1.0, 1, 0}).regularizer).spec.sigma == 0.5);
}

TEST_CASE("rel_err_at_passes interpolates between rows")
{
  RunRecord r;
  r.rows.resize(2);
  r.rows[0].rel_err = 1.0;
  r.rows[1].iteration = 4;
  r.rows[1].data_passes = 2.0;
  r.rows[1].rel_err = 0.5;
  CHECK(*rel_err_at_passes(r, 1.0) == doctest::Approx(0.75));
  CHECK(*rel_err_at_passes(r, 2.0) == 0.5);
  CHECK_FALSE(rel_err_at_passes(r, 2.5).has_value());
  CHECK_FALSE(rel_err_at_passes(RunRecord{}, 0.0).has_value());
}

TEST_CASE("sweep outputs")
{
  SweepContext const ctx = small_context();
  SweepGrid g;
  g.algorithms = {"proxsvrg", "proxsvrgskip"};
  g.n_subsets = {4};
  g.probabilities = {0.2};
  g.inner_iterations = {5};
  g.seeds = {1, 2};
  g.tolerances = {0.5, 1e-12};

  auto const d1 = testing::scratch_dir("sweep_j1");
  auto const d2 = testing::scratch_dir("sweep_j2");
  SweepReport const r1 = run_sweep(g, ctx, d1, 1);
  SweepReport const r2 = run_sweep(g, ctx, d2, 2);
  REQUIRE(r1.cells.size() == 4);

  auto const summary = parse_csv(slurp(d1 / "summary.csv"));
  REQUIRE(summary.size() == 1 + 4 * 2);
  std::vector<std::string> const header{"algorithm", "N",         "p",          "inner_iterations", "seed",
                                        "gamma",     "tolerance", "time_to_eps", "K",                "data_passes_to_eps",
                                        "prox_calls_to_eps", "prox_calls_total", "final_rel_err", "status"};
  CHECK(summary[0] == header);
  for (size_t k = 1; k < summary.size(); ++k) {
    REQUIRE(summary[k].size() == header.size());
    if (summary[k][6] == "1e-12") {
      CHECK(summary[k][7] == kNotReached);
      CHECK(summary[k][8] == kNotReached);
    } else {
      CHECK(summary[k][7] != kNotReached);
      CHECK(std::stoll(summary[k][8]) > 0);
    }
    CHECK(summary[k][13] == "ok");
  }

  SUBCASE("parallel jobs give the same results apart from timings")
  {
    auto const s2 = parse_csv(slurp(d2 / "summary.csv"));
    REQUIRE(s2.size() == summary.size());
    for (size_t k = 0; k < summary.size(); ++k) {
      auto a = summary[k];
      auto b = s2[k];
      a[7].clear();
      b[7].clear();
      CHECK(a == b);
    }
    for (size_t c = 0; c < r1.cells.size(); ++c) {
      auto const &x = r1.cells[c].record.rows;
      auto const &y = r2.cells[c].record.rows;
      REQUIRE(x.size() == y.size());
      for (size_t k = 0; k < x.size(); ++k) {
        CHECK(x[k].rel_err == y[k].rel_err);
        CHECK(x[k].prox_calls == y[k].prox_calls);
        CHECK(x[k].data_passes == y[k].data_passes);
      }
    }
  }
  SUBCASE("per-cell files, speedups and curves")
  {
    for (auto const &c : r1.cells) { CHECK(std::filesystem::exists(d1 / ("cell_" + c.cell.label() + ".csv"))); }
    auto const speed = parse_csv(slurp(d1 / "speedups.csv"));
    CHECK(speed.size() == 1 + 2 * 2);
    CHECK(speed[0].back() == "speedup");
    std::string const curves = slurp(d1 / "curves.dat");
    CHECK(curves.rfind("# proxsvrg_N4_p1_inner5_seed1\n", 0) == 0);
    CHECK(std::count(curves.begin(), curves.end(), '#') == 4);
    CHECK(curves.find("\n\n\n# ") != std::string::npos);
  }
  SUBCASE("prox calls of skipped cells are binomial")
  {
    for (auto const &c : r1.cells) {
      auto const &last = c.record.rows.back();
      double const k = static_cast<double>(last.iteration);
      double const p = c.cell.p;
      if (p == 1.0) {
        CHECK(last.prox_calls == last.iteration);
      } else {
        CHECK(std::abs(static_cast<double>(last.prox_calls) - k * p) <= 3.0 * std::sqrt(k * p * (1.0 - p)));
      }
    }
  }
}
