#include "proxskip/selfcheck.hpp"
#include "proxskip/metrics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace proxskip {

namespace {

Image random_image(Index const h, Index const w, std::mt19937_64 &rng, double const lo = 0.0, double const hi = 1.0)
{
  std::uniform_real_distribution<double> u(lo, hi);
  Image out(h, w);
  for (Index k = 0; k < out.size(); ++k) { out.data()[k] = u(rng); }
  return out;
}

SinoMatrix random_sino(Index const rows, Index const cols, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SinoMatrix out(rows, cols);
  for (Index k = 0; k < out.size(); ++k) { out.data()[k] = u(rng); }
  return out;
}

Eigen::VectorXd flat(Image const &x) { return Eigen::Map<Eigen::VectorXd const>(x.data(), x.size()); }

Image unflat(Eigen::VectorXd const &v, Index const h, Index const w)
{
  return Eigen::Map<Image const>(v.data(), h, w);
}

double rel_max(Eigen::Ref<Eigen::VectorXd const> const a, Eigen::Ref<Eigen::VectorXd const> const b)
{
  double const scale = std::max(b.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Small random tomography problem shared by the estimator checks.
struct ToyProblem
{
  ParallelGeometry geometry;
  Index width = 10;
  Index height = 10;
  std::shared_ptr<ParallelProjector const> projector;
  SinoMatrix measured;
  Eigen::MatrixXd dense;
};

ToyProblem toy_problem(std::mt19937_64 &rng)
{
  ToyProblem t;
  t.geometry = ParallelGeometry::uniform(20, 15);
  t.projector = std::make_shared<ParallelProjector const>(t.geometry, t.width, t.height);
  t.measured = random_sino(t.geometry.n_angles(), t.geometry.n_bins, rng);
  t.dense = projector_matrix_oracle(t.geometry, t.width, t.height);
  return t;
}

Eigen::VectorXd dense_gradient(ToyProblem const &t, Image const &x)
{
  Eigen::VectorXd const b = Eigen::Map<Eigen::VectorXd const>(t.measured.data(), t.measured.size());
  return t.dense.transpose() * (t.dense * flat(x) - b);
}

} // namespace

Eigen::MatrixXd projector_matrix_oracle(ParallelGeometry const &geometry, Index const width, Index const height)
{
  geometry.validate();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(geometry.n_rays(), width * height);
  double const ps = geometry.pixel_size;
  for (Index a = 0; a < geometry.n_angles(); ++a) {
    double const c = std::cos(geometry.angles[static_cast<size_t>(a)]);
    double const s = std::sin(geometry.angles[static_cast<size_t>(a)]);
    for (Index b = 0; b < geometry.n_bins; ++b) {
      Index const ray = a * geometry.n_bins + b;
      double const off = (static_cast<double>(b) - 0.5 * static_cast<double>(geometry.n_bins - 1)) * geometry.bin_spacing;
      for (Index i = 0; i < height; ++i) {
        for (Index j = 0; j < width; ++j) {
          double w = 0.0;
          if (std::abs(c) >= std::abs(s)) {
            double const y = (0.5 * static_cast<double>(height - 1) - static_cast<double>(i)) * ps;
            double const u = (off - y * s) / c / ps + 0.5 * static_cast<double>(width - 1);
            w = ps / std::abs(c) * std::max(0.0, 1.0 - std::abs(u - static_cast<double>(j)));
          } else {
            double const x = (static_cast<double>(j) - 0.5 * static_cast<double>(width - 1)) * ps;
            double const v = 0.5 * static_cast<double>(height - 1) - (off - x * c) / s / ps;
            w = ps / std::abs(s) * std::max(0.0, 1.0 - std::abs(v - static_cast<double>(i)));
          }
          M(ray, i * width + j) = w;
        }
      }
    }
  }
  return M;
}

double adjoint_identity_error(ParallelProjector const &A, int const pairs, std::uint64_t const seed)
{
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    Image const x = random_image(A.height(), A.width(), rng);
    SinoMatrix const y = random_sino(A.geometry().n_angles(), A.geometry().n_bins, rng);
    double const lhs = A.forward(x).cwiseProduct(y).sum();
    double const rhs = x.cwiseProduct(A.adjoint(y)).sum();
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
  }
  return worst;
}

double dense_equivalence_error(ParallelGeometry const &geometry, Index const width, Index const height, std::uint64_t const seed)
{
  std::mt19937_64 rng(seed);
  ParallelProjector const A(geometry, width, height);
  Eigen::MatrixXd const M = projector_matrix_oracle(geometry, width, height);
  Eigen::MatrixXd const assembled = assemble_dense(geometry, width, height);
  double worst = (assembled - M).cwiseAbs().maxCoeff() / M.cwiseAbs().maxCoeff();
  for (int k = 0; k < 5; ++k) {
    Image const x = random_image(height, width, rng, -1.0, 1.0);
    SinoMatrix const fx = A.forward(x);
    worst = std::max(worst, rel_max(Eigen::Map<Eigen::VectorXd const>(fx.data(), fx.size()), M * flat(x)));
    SinoMatrix const y = random_sino(geometry.n_angles(), geometry.n_bins, rng);
    Eigen::VectorXd const yv = Eigen::Map<Eigen::VectorXd const>(y.data(), y.size());
    worst = std::max(worst, rel_max(flat(A.adjoint(y)), M.transpose() * yv));
  }
  return worst;
}

double estimator_enumeration_error(EstimatorKind const kind, Index const n_subsets, std::uint64_t const seed)
{
  std::mt19937_64 rng(seed);
  ToyProblem const t = toy_problem(rng);
  LeastSquaresData const data(t.projector, t.measured, build_staggered_partition(t.geometry.n_angles(), n_subsets));
  Image const x = random_image(t.height, t.width, rng);
  Eigen::VectorXd const g = dense_gradient(t, x);

  // Non-trivial estimator memory: random SAGA table, SVRG snapshot away from x.
  SagaState saga = SagaState::zeros(n_subsets, t.width, t.height);
  for (auto &v : saga.table) {
    v = random_image(t.height, t.width, rng, -1.0, 1.0);
    saga.running_sum += v;
  }
  SvrgState const svrg = SvrgState::at(random_image(t.height, t.width, rng), data);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.size());
  for (Index i = 0; i < n_subsets; ++i) {
    Image est;
    switch (kind) {
    case EstimatorKind::Full: est = full_gradient(x, data); break;
    case EstimatorKind::Sgd: est = sgd_estimate(x, i, data); break;
    case EstimatorKind::Saga: {
      SagaState copy = saga;
      est = saga_estimate_update(x, i, copy, data);
      break;
    }
    case EstimatorKind::Svrg:
    case EstimatorKind::Lsvrg: est = svrg_estimate(x, i, svrg, data); break;
    }
    mean += flat(est);
  }
  mean /= static_cast<double>(n_subsets);
  return rel_max(mean, g);
}

double proxskip_ista_deviation(Problem const &problem, double const gamma, int const iterations)
{
  Image const x0 = Image::Zero(problem.height(), problem.width());

  SolverConfig config;
  config.gamma = gamma;
  config.skip_probability = 1.0;
  config.estimator = EstimatorKind::Full;
  config.max_iterations = iterations;
  config.max_data_passes = std::numeric_limits<double>::infinity();
  Image const skip = run(config, problem, x0).x;

  // Plain proximal gradient, sharing only the prox operator (with its warm start).
  IterateState state;
  state.x = x0;
  Image x = x0;
  for (int k = 0; k < iterations; ++k) {
    auto const &A = problem.data->projector();
    Image const grad = A.adjoint(A.forward(x) - problem.data->measured());
    x = apply_prox(problem, x - gamma * grad, gamma, state);
  }
  return (skip - x).cwiseAbs().maxCoeff();
}

double single_subset_deviation(int const iterations, std::uint64_t const seed)
{
  std::mt19937_64 rng(seed);
  ToyProblem const t = toy_problem(rng);
  LeastSquaresData const data(t.projector, t.measured, build_staggered_partition(t.geometry.n_angles(), 1));
  double worst = 0.0;
  for (EstimatorKind const kind : {EstimatorKind::Sgd, EstimatorKind::Saga, EstimatorKind::Svrg, EstimatorKind::Lsvrg}) {
    Image x = random_image(t.height, t.width, rng);
    GradientEstimator est(kind, data, x, seed);
    for (int k = 0; k < iterations; ++k) {
      Image const g = est.estimate(x);
      Image const full = full_gradient(x, data);
      worst = std::max(worst, (g - full).cwiseAbs().maxCoeff());
      x = x - 1e-3 * full;
    }
  }
  return worst;
}

Image tv_prox_oracle(Image const &z, double const weight, bool const nonneg, double const gap_tolerance, double *gap_out)
{
  Index const h = z.rows();
  Index const w = z.cols();
  Index const n = h * w;
  // D stacks horizontal then vertical forward differences, zero on the far edge.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, n);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      Index const k = i * w + j;
      if (j + 1 < w) {
        D(k, k + 1) = 1.0;
        D(k, k) = -1.0;
      }
      if (i + 1 < h) {
        D(n + k, k + w) = 1.0;
        D(n + k, k) = -1.0;
      }
    }
  }
  Eigen::VectorXd const zv = flat(z);

  auto primal_of = [&](Eigen::VectorXd const &p) -> Eigen::VectorXd {
    Eigen::VectorXd x = zv - weight * D.transpose() * p;
    if (nonneg) { x = x.cwiseMax(0.0); }
    return x;
  };
  auto primal_value = [&](Eigen::VectorXd const &x) {
    Eigen::VectorXd const d = D * x;
    double tv = 0.0;
    for (Index k = 0; k < n; ++k) { tv += std::hypot(d(k), d(n + k)); }
    return 0.5 * (x - zv).squaredNorm() + weight * tv;
  };
  auto dual_value = [&](Eigen::VectorXd const &p) {
    Eigen::VectorXd const x = primal_of(p);
    return 0.5 * (x - zv).squaredNorm() + weight * (D.transpose() * p).dot(x);
  };

  // ADMM on x with v = Dx and w = x (w >= 0 only when nonneg), rho = 1.
  Eigen::MatrixXd K = D.transpose() * D;
  K.diagonal().array() += nonneg ? 2.0 : 1.0;
  Eigen::LLT<Eigen::MatrixXd> const llt(K);
  Eigen::VectorXd x = zv;
  Eigen::VectorXd v = D * x;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n);
  Eigen::VectorXd wv = x;
  Eigen::VectorXd uw = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2 * n);
  double gap = std::numeric_limits<double>::infinity();
  for (long it = 1; it <= 200'000; ++it) {
    Eigen::VectorXd rhs = zv + D.transpose() * (v - u);
    if (nonneg) { rhs += wv - uw; }
    x = llt.solve(rhs);
    Eigen::VectorXd const dx = D * x;
    for (Index k = 0; k < n; ++k) {
      double const a = dx(k) + u(k);
      double const b = dx(n + k) + u(n + k);
      double const r = std::hypot(a, b);
      double const shrink = r > weight ? 1.0 - weight / r : 0.0;
      v(k) = shrink * a;
      v(n + k) = shrink * b;
    }
    u += dx - v;
    if (nonneg) {
      wv = (x + uw).cwiseMax(0.0);
      uw += x - wv;
    }
    if (it % 100 == 0) {
      // Scaled multiplier of v = Dx, projected onto the unit balls, is dual feasible.
      p = u / weight;
      for (Index k = 0; k < n; ++k) {
        double const r = std::hypot(p(k), p(n + k));
        if (r > 1.0) {
          p(k) /= r;
          p(n + k) /= r;
        }
      }
      gap = primal_value(primal_of(p)) - dual_value(p);
      if (gap < gap_tolerance) { break; }
    }
  }
  if (gap_out != nullptr) { *gap_out = gap; }
  return unflat(primal_of(p), h, w);
}

double tv_prox_oracle_error(std::vector<double> const &alphas, std::uint64_t const seed)
{
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (Index h = 3; h <= 5; ++h) {
    for (Index w = 3; w <= 5; ++w) {
      for (double const alpha : alphas) {
        for (bool const nonneg : {false, true}) {
          Image const z = random_image(h, w, rng, -0.2, 1.0);
          TvProxConfig config;
          config.alpha = alpha;
          config.inner_iterations = 2000;
          config.warm_start = false;
          config.nonneg = nonneg;
          Image const fgp = tv_prox(z, 1.0, config).image;
          Image const ref = tv_prox_oracle(z, alpha, nonneg, 1e-14);
          worst = std::max(worst, (fgp - ref).cwiseAbs().maxCoeff());
        }
      }
    }
  }
  return worst;
}

double naive_relative_error_sq(Image const &x, Image const &ref)
{
  double num = 0.0;
  double den = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      num += (x(i, j) - ref(i, j)) * (x(i, j) - ref(i, j));
      den += ref(i, j) * ref(i, j);
    }
  }
  return num / den;
}

double naive_psnr(Image const &x, Image const &ref, double const data_range)
{
  double mse = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) { mse += (x(i, j) - ref(i, j)) * (x(i, j) - ref(i, j)); }
  }
  mse /= static_cast<double>(x.size());
  return mse == 0.0 ? kPsnrCapDb : std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

double naive_ssim(Image const &x, Image const &ref)
{
  int const win = 11;
  double const sigma = 1.5;
  double range = ref.maxCoeff() - ref.minCoeff();
  if (!(range > 0.0)) { range = 1.0; }
  double const c1 = (0.01 * range) * (0.01 * range);
  double const c2 = (0.03 * range) * (0.03 * range);

  double wsum = 0.0;
  Eigen::MatrixXd wk(win, win);
  for (int a = 0; a < win; ++a) {
    for (int b = 0; b < win; ++b) {
      double const da = a - 5;
      double const db = b - 5;
      wk(a, b) = std::exp(-(da * da + db * db) / (2.0 * sigma * sigma));
      wsum += wk(a, b);
    }
  }
  wk /= wsum;

  double total = 0.0;
  long count = 0;
  for (Index i = 0; i + win <= x.rows(); ++i) {
    for (Index j = 0; j + win <= x.cols(); ++j) {
      double mx = 0.0;
      double my = 0.0;
      for (int a = 0; a < win; ++a) {
        for (int b = 0; b < win; ++b) {
          mx += wk(a, b) * x(i + a, j + b);
          my += wk(a, b) * ref(i + a, j + b);
        }
      }
      double vx = 0.0;
      double vy = 0.0;
      double cxy = 0.0;
      for (int a = 0; a < win; ++a) {
        for (int b = 0; b < win; ++b) {
          double const dx = x(i + a, j + b) - mx;
          double const dy = ref(i + a, j + b) - my;
          vx += wk(a, b) * dx * dx;
          vy += wk(a, b) * dy * dy;
          cxy += wk(a, b) * dx * dy;
        }
      }
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double metrics_oracle_error(int const pairs, std::uint64_t const seed)
{
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    Image const ref = random_image(24, 20, rng);
    Image const x = ref + 0.2 * random_image(24, 20, rng, -1.0, 1.0);
    worst = std::max(worst, std::abs(relative_error_sq(x, ref) - naive_relative_error_sq(x, ref)));
    worst = std::max(worst, std::abs(psnr(x, ref, 1.0) - naive_psnr(x, ref, 1.0)));
    worst = std::max(worst, std::abs(ssim(x, ref) - naive_ssim(x, ref)));
  }
  return worst;
}

std::vector<CheckResult> run_self_checks()
{
  std::vector<CheckResult> out;
  auto add = [&](std::string name, double const measured, double const threshold, std::string detail = {}) {
    out.push_back({std::move(name), measured <= threshold, measured, threshold, std::move(detail)});
  };

  {
    ParallelProjector const A(ParallelGeometry::uniform(30, 40), 24, 24);
    add("adjoint identity (relative)", adjoint_identity_error(A, 20, 1), 1e-10, "24x24, 30 angles, 20 pairs");
  }
  add("dense matrix equivalence", dense_equivalence_error(ParallelGeometry::uniform(12, 23), 16, 16, 2), 1e-12,
      "16x16, 12 angles");
  for (Index const n : {2, 5, 10}) {
    double worst = 0.0;
    for (EstimatorKind const kind :
         {EstimatorKind::Full, EstimatorKind::Sgd, EstimatorKind::Saga, EstimatorKind::Svrg, EstimatorKind::Lsvrg}) {
      worst = std::max(worst, estimator_enumeration_error(kind, n, 3));
    }
    add("estimator unbiasedness N=" + std::to_string(n), worst, 1e-10, "all estimator kinds");
  }
  add("N=1 estimators equal the full gradient", single_subset_deviation(10, 4), 0.0, "bitwise");
  {
    std::mt19937_64 rng(5);
    ParallelGeometry const g = ParallelGeometry::uniform(16, 23);
    auto const A = std::make_shared<ParallelProjector const>(g, 16, 16);
    Problem problem;
    problem.data = std::make_shared<LeastSquaresData>(A, random_sino(g.n_angles(), g.n_bins, rng), SubsetPartition(16, 1));
    TvProxConfig tv;
    tv.alpha = 0.5;
    problem.regularizer = TvRegularizer{tv};
    double const L = operator_norm_sq(*A, 100, 0);
    add("p=1 full-gradient ProxSkip equals proximal gradient", proxskip_ista_deviation(problem, 1.0 / L, 50), 0.0,
        "bitwise, 50 iterations");
  }
  add("TV prox vs certified dense solution", tv_prox_oracle_error({0.05, 0.2, 0.5}, 0), 1e-6,
      "all shapes 3x3 to 5x5, alpha 0.05/0.2/0.5, with and without x >= 0, 2000 FGP iterations");
  add("metrics vs naive loops", metrics_oracle_error(3, 7), 1e-10, "rel_err, PSNR, SSIM");
  return out;
}

} // namespace proxskip
