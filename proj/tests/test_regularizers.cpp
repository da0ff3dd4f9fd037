#include "proxskip/denoise.hpp"
#include "proxskip/selfcheck.hpp"
#include "proxskip/tv.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>

using namespace proxskip;
using testing::bitwise_equal;
using testing::random_image;

namespace {

double naive_tv(Image const &x)
{
  double tv = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      double const dh = j + 1 < x.cols() ? x(i, j + 1) - x(i, j) : 0.0;
      double const dv = i + 1 < x.rows() ? x(i + 1, j) - x(i, j) : 0.0;
      tv += std::sqrt(dh * dh + dv * dv);
    }
  }
  return tv;
}

TvProxConfig cold(double alpha, int inner, bool nonneg)
{
  TvProxConfig c;
  c.alpha = alpha;
  c.inner_iterations = inner;
  c.warm_start = false;
  c.nonneg = nonneg;
  return c;
}

} // namespace

TEST_CASE("TV value")
{
  CHECK(tv_value(Image::Constant(4, 5, 2.5)) == 0.0);
  Image row(1, 2);
  row << 0.0, 1.0;
  CHECK(tv_value(row) == 1.0);
  std::mt19937_64 rng(1);
  Image const x = random_image(5, 5, rng);
  CHECK(std::abs(tv_value(x) - naive_tv(x)) <= 1e-14);
}

TEST_CASE("difference operator adjoint")
{
  std::mt19937_64 rng(2);
  Image const x = random_image(6, 7, rng, -1.0, 1.0);
  Image const p = random_image(6, 7, rng, -1.0, 1.0);
  Image const q = random_image(6, 7, rng, -1.0, 1.0);
  double const lhs = forward_diff_h(x).cwiseProduct(p).sum() + forward_diff_v(x).cwiseProduct(q).sum();
  double const rhs = x.cwiseProduct(diff_adjoint(p, q)).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
}

TEST_CASE("TV prox limits")
{
  std::mt19937_64 rng(3);
  Image const z = random_image(6, 6, rng, -0.5, 1.0);
  SUBCASE("vanishing weight is the identity (clipped when nonneg)")
  {
    CHECK(bitwise_equal(tv_prox(z, 1.0, cold(1e-300, 20, false)).image, z));
    CHECK(bitwise_equal(tv_prox(z, 1.0, cold(1e-300, 20, true)).image, Image(z.cwiseMax(0.0))));
  }
  SUBCASE("constant positive image is a fixed point")
  {
    Image const c = Image::Constant(5, 4, 0.7);
    for (double alpha : {0.01, 1.0, 100.0}) { CHECK(bitwise_equal(tv_prox(c, 1.0, cold(alpha, 50, true)).image, c)); }
  }
  SUBCASE("tau must be positive")
  {
    CHECK_THROWS_AS(tv_prox(z, 0.0, cold(0.1, 5, true)), ParameterError);
    CHECK_THROWS_AS(tv_prox(z, -1.0, cold(0.1, 5, true)), ParameterError);
  }
}

TEST_CASE("TV prox on a 3x3 instance matches the certified dense solution")
{
  std::mt19937_64 rng(4);
  Image const z = random_image(3, 3, rng);
  for (bool nonneg : {false, true}) {
    Image const fgp = tv_prox(z, 1.0, cold(0.5, 2000, nonneg)).image;
    Image const ref = tv_prox_oracle(z, 0.5, nonneg, 1e-14);
    CHECK((fgp - ref).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("dense oracle and FGP against interior-point fixtures")
{
  std::ifstream f(std::string(PROXSKIP_TEST_DATA) + "/tv_prox_cases.json");
  REQUIRE(f.good());
  nlohmann::json const doc = nlohmann::json::parse(f);
  double worst_gap = 0.0;
  double worst_ipm = 0.0;
  double worst_excess = -1.0;
  double worst_fgp = 0.0;
  for (auto const &c : doc.at("cases")) {
    Index const h = c.at("height").get<Index>();
    Index const w = c.at("width").get<Index>();
    auto const zv = c.at("z").get<std::vector<double>>();
    auto const xv = c.at("x").get<std::vector<double>>();
    Image const z = Eigen::Map<Image const>(zv.data(), h, w);
    Image const x_ipm = Eigen::Map<Image const>(xv.data(), h, w);
    double const alpha = c.at("alpha").get<double>();
    bool const nonneg = c.at("nonneg").get<bool>();
    auto objective = [&](Image const &x) { return 0.5 * (x - z).squaredNorm() + alpha * tv_value(x); };

    double gap = 0.0;
    Image const oracle = tv_prox_oracle(z, alpha, nonneg, 1e-14, &gap);
    worst_gap = std::max(worst_gap, gap);
    worst_ipm = std::max(worst_ipm, (oracle - x_ipm).cwiseAbs().maxCoeff());
    Image const ipm_feasible = nonneg ? Image(x_ipm.cwiseMax(0.0)) : x_ipm;
    worst_excess = std::max(worst_excess, objective(oracle) - objective(ipm_feasible));
    worst_fgp = std::max(worst_fgp, (tv_prox(z, 1.0, cold(alpha, 20000, nonneg)).image - oracle).cwiseAbs().maxCoeff());
  }
  MESSAGE("oracle gap " << worst_gap << ", vs interior point " << worst_ipm << ", objective excess " << worst_excess
                        << ", FGP(20000) vs oracle " << worst_fgp);
  CHECK(worst_gap <= 1e-14);
  // The interior-point solutions are accurate to about 1e-6 near kinks of the TV term.
  CHECK(worst_ipm <= 3e-6);
  CHECK(worst_excess <= 1e-12);
  CHECK(worst_fgp <= 1e-7);
}

TEST_CASE("nonnegativity projection")
{
  Image v(1, 3);
  v << -1.0, 2.0, 0.0;
  Image expected(1, 3);
  expected << 0.0, 2.0, 0.0;
  CHECK(bitwise_equal(nonneg_prox(v), expected));
  std::mt19937_64 rng(5);
  Image const pos = random_image(4, 4, rng);
  CHECK(bitwise_equal(nonneg_prox(pos), pos));
  for (int k = 0; k < 100; ++k) {
    Image const x = random_image(3, 5, rng, -1.0, 1.0);
    CHECK(bitwise_equal(nonneg_prox(nonneg_prox(x)), nonneg_prox(x)));
  }
}

TEST_CASE("TV prox properties")
{
  std::mt19937_64 rng(6);
  SUBCASE("objective at the output does not exceed the objective at the input")
  {
    for (int k = 0; k < 100; ++k) {
      Image const z = random_image(6, 6, rng, -0.2, 1.0);
      bool const nonneg = k % 2 == 0;
      double const weight = 0.02 + 0.01 * k;
      Image const x = tv_prox(z, 1.0, cold(weight, 10, nonneg)).image;
      double const at_input = tv_prox_objective(nonneg ? Image(z.cwiseMax(0.0)) : z, z, weight, nonneg);
      CHECK(tv_prox_objective(x, z, weight, nonneg) <= at_input);
    }
  }
  SUBCASE("nonexpansive")
  {
    for (int k = 0; k < 20; ++k) {
      Image const u = random_image(5, 5, rng, -0.2, 1.0);
      Image const v = random_image(5, 5, rng, -0.2, 1.0);
      auto const c = cold(0.1, 2000, k % 2 == 0);
      CHECK((tv_prox(u, 1.0, c).image - tv_prox(v, 1.0, c).image).norm() <= (u - v).norm() + 1e-6);
    }
  }
  SUBCASE("cold start is repeatable bitwise")
  {
    Image const z = random_image(8, 8, rng);
    auto const c = cold(0.2, 30, true);
    CHECK(bitwise_equal(tv_prox(z, 0.7, c).image, tv_prox(z, 0.7, c).image));
  }
  SUBCASE("dual feasibility after every inner iteration")
  {
    Image const z = random_image(8, 8, rng, -0.5, 1.5);
    double worst = 0.0;
    tv_prox(z, 1.0, cold(0.3, 100, true), nullptr,
            [&](int, TvDualState const &st) { worst = std::max(worst, st.max_dual_norm()); });
    CHECK(worst <= 1.0 + 1e-12);
  }
  SUBCASE("scaling law")
  {
    Image const z = random_image(7, 6, rng);
    double const tau = 0.37;
    TvProxConfig a = cold(0.8, 40, true);
    TvProxConfig b = cold(tau * 0.8, 40, true);
    CHECK(bitwise_equal(tv_prox(z, tau, a).image, tv_prox(z, 1.0, b).image));
  }
}

TEST_CASE("warm start")
{
  std::mt19937_64 rng(7);
  Image const z = random_image(6, 6, rng);
  TvProxConfig c = cold(0.3, 5, true);
  c.warm_start = true;
  TvProxResult const first = tv_prox(z, 1.0, c);
  CHECK(warm_state_compatible(first.dual, z, 0.3));
  CHECK_FALSE(warm_state_compatible(first.dual, z, 0.3 * (1.0 + 1e-9)));
  CHECK_FALSE(warm_state_compatible(first.dual, Image::Zero(5, 6), 0.3));

  // Warm-started continuation converges further than a fresh 5-iteration call.
  Image const ref = tv_prox_oracle(z, 0.3, true, 1e-14);
  TvProxResult const second = tv_prox(z, 1.0, c, &first.dual);
  CHECK((second.image - ref).cwiseAbs().maxCoeff() < (first.image - ref).cwiseAbs().maxCoeff());

  // A different weight ignores the stored dual.
  TvProxResult const rescaled = tv_prox(z, 2.0, c, &first.dual);
  CHECK(bitwise_equal(rescaled.image, tv_prox(z, 2.0, c).image));
}

TEST_CASE("configuration validation")
{
  CHECK_THROWS_AS(cold(0.0, 5, true).validate(), ParameterError);
  CHECK_THROWS_AS(cold(0.1, 0, true).validate(), ParameterError);
  DenoiserSpec d;
  d.sigma = 0.0;
  CHECK_THROWS_AS(d.validate(), ParameterError);
}

TEST_CASE("builtin denoisers")
{
  Image const c = Image::Constant(9, 8, 0.4);
  DenoiserSpec gauss;
  gauss.sigma = 2.0;
  CHECK((apply_denoiser(c, gauss) - c).cwiseAbs().maxCoeff() <= 1e-15);
  DenoiserSpec median;
  median.kind = DenoiserKind::Median;
  CHECK(bitwise_equal(apply_denoiser(c, median), c));

  std::mt19937_64 rng(8);
  Image const x = random_image(9, 8, rng);
  gauss.sigma = 1e-9;
  CHECK((apply_denoiser(x, gauss) - x).cwiseAbs().maxCoeff() <= 1e-15);

  // Small std: three taps t/2, 1 - t, t/2 to first order, so the variance is t.
  Image bump = Image::Zero(31, 31);
  bump(15, 15) = 1.0;
  Image const b = gaussian_blur(bump, 0.1);
  CHECK(b(15, 16) == doctest::Approx(0.005 * (1.0 - 0.01)).epsilon(1e-3));
  double var = 0.0;
  for (Index j = 0; j < 31; ++j) { var += b.col(j).sum() * static_cast<double>((j - 15) * (j - 15)); }
  CHECK(var == doctest::Approx(0.01).epsilon(1e-4));

  Image impulse = Image::Zero(9, 9);
  impulse(4, 4) = 1.0;
  CHECK(median3x3(impulse).cwiseAbs().maxCoeff() == 0.0);

  // Median of a 3x3 neighbourhood, evaluated directly.
  Image const m = median3x3(x);
  for (Index i = 1; i + 1 < x.rows(); ++i) {
    for (Index j = 1; j + 1 < x.cols(); ++j) {
      std::vector<double> v;
      for (Index a = -1; a <= 1; ++a) {
        for (Index b = -1; b <= 1; ++b) { v.push_back(x(i + a, j + b)); }
      }
      std::nth_element(v.begin(), v.begin() + 4, v.end());
      CHECK(m(i, j) == v[4]);
    }
  }

  // Mass is preserved away from the boundary.
  CHECK(gaussian_blur(bump, 2.0).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("external denoiser")
{
  std::mt19937_64 rng(9);
  Image const x = random_image(5, 4, rng);
  DenoiserSpec spec;
  spec.kind = DenoiserKind::External;
  spec.sigma = 0.5;
  spec.command = "python3 -c \"import sys,json,struct;"
                 "m=json.loads(sys.stdin.buffer.readline());"
                 "n=m['width']*m['height'];"
                 "v=struct.unpack('<%dd'%n,sys.stdin.buffer.read(8*n));"
                 "sys.stdout.buffer.write(struct.pack('<%dd'%n,*[2*t+m['sigma'] for t in v]))\"";
  Image const y = apply_denoiser(x, spec);
  CHECK(bitwise_equal(y, Image((2.0 * x).array() + 0.5)));

  spec.command = "echo 'model file missing' >&2; exit 4";
  try {
    apply_denoiser(x, spec);
    FAIL("expected a denoiser error");
  } catch (DenoiserError const &e) {
    CHECK(std::string(e.what()).find("model file missing") != std::string::npos);
  }
}

TEST_CASE("skip sigma")
{
  CHECK(skip_sigma(2e-4, 1.0) == 2e-4);
  CHECK(skip_sigma(2e-4, 0.25) == doctest::Approx(4e-4).epsilon(1e-15));
  CHECK(skip_sigma(2e-4, 0.05) == doctest::Approx(8.94427190999916e-4).epsilon(1e-12));
  CHECK_THROWS_AS(skip_sigma(2e-4, 0.0), ParameterError);
  CHECK_THROWS_AS(skip_sigma(2e-4, 1.5), ParameterError);
  CHECK_THROWS_AS(skip_sigma(-1.0, 0.5), ParameterError);
}
