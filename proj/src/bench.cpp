#include "proxskip/bench.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace proxskip {

void StoppingRule::validate() const
{
  if (tolerance < 0.0 || std::isnan(tolerance)) { throw ParameterError("tolerance must be non-negative"); }
  if (!(max_data_passes > 0.0)) { throw ParameterError("data-pass budget must be positive"); }
  if (time_budget && !(*time_budget > 0.0)) { throw ParameterError("time budget must be positive"); }
  if (std::isinf(max_data_passes) && !time_budget) { throw ParameterError("stopping rule needs a finite budget"); }
}

void SweepGrid::validate() const
{
  if (algorithms.empty() || n_subsets.empty() || probabilities.empty() || inner_iterations.empty() || tolerances.empty()) {
    throw ParameterError("sweep grid axes must be non-empty");
  }
  for (auto const &a : algorithms) { algorithm_from_name(a); }
  for (auto const n : n_subsets) {
    if (n < 1) { throw ParameterError("sweep subset counts must be >= 1"); }
  }
  for (auto const p : probabilities) {
    if (!(p > 0.0 && p <= 1.0)) { throw ParameterError("sweep probabilities must lie in (0, 1]"); }
  }
  for (auto const k : inner_iterations) {
    if (k < 1) { throw ParameterError("sweep inner iteration counts must be >= 1"); }
  }
  if (seeds.empty() && repetitions < 1) { throw ParameterError("sweep needs at least one repetition"); }
}

std::vector<std::uint64_t> SweepGrid::seed_list() const
{
  if (!seeds.empty()) { return seeds; }
  std::vector<std::uint64_t> s;
  for (int r = 0; r < repetitions; ++r) { s.push_back(static_cast<std::uint64_t>(r)); }
  return s;
}

namespace {

std::string fmt_double(double const v)
{
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string fmt_short(double const v)
{
  std::ostringstream s;
  s << v;
  return s.str();
}

} // namespace

std::string SweepCell::label() const
{
  return algorithm + "_N" + std::to_string(n_subsets) + "_p" + fmt_short(p) + "_inner" + std::to_string(inner_iterations) +
         "_seed" + std::to_string(seed);
}

std::vector<SweepCell> expand_grid(SweepGrid const &grid)
{
  grid.validate();
  std::vector<SweepCell> cells;
  for (auto const &name : grid.algorithms) {
    Algorithm const alg = algorithm_from_name(name);
    std::vector<Index> const ns = alg.stochastic() ? grid.n_subsets : std::vector<Index>{1};
    std::vector<double> const ps = alg.skip ? grid.probabilities : std::vector<double>{1.0};
    for (auto const inner : grid.inner_iterations) {
      for (auto const n : ns) {
        for (auto const p : ps) {
          for (auto const seed : grid.seed_list()) { cells.push_back({alg.name, n, p, inner, seed}); }
        }
      }
    }
  }
  return cells;
}

Problem cell_problem(SweepContext const &ctx, SweepCell const &cell)
{
  Problem problem;
  problem.data = std::make_shared<LeastSquaresData>(ctx.projector, ctx.measured,
                                                    build_staggered_partition(ctx.projector->geometry().n_angles(), cell.n_subsets));
  problem.regularizer = ctx.regularizer;
  if (auto *tv = std::get_if<TvRegularizer>(&problem.regularizer)) { tv->config.inner_iterations = cell.inner_iterations; }
  if (auto *den = std::get_if<DenoiserRegularizer>(&problem.regularizer)) {
    if (cell.p < 1.0) { den->spec.sigma = skip_sigma(den->spec.sigma, cell.p); }
  }
  return problem;
}

CellOutcome run_cell(SweepContext const &ctx, SweepCell const &cell)
{
  CellOutcome out;
  out.cell = cell;
  Algorithm const alg = algorithm_from_name(cell.algorithm);
  auto const over = ctx.step_overrides.find(alg.name);
  out.gamma = over != ctx.step_overrides.end() ? over->second : default_step_size(alg, ctx.lipschitz);

  SolverConfig config;
  config.gamma = out.gamma;
  config.skip_probability = cell.p;
  config.n_subsets = cell.n_subsets;
  config.max_data_passes = ctx.stopping.max_data_passes;
  config.time_budget = ctx.stopping.time_budget;
  config.tolerance = ctx.stopping.tolerance;
  config.seed = cell.seed;

  RunLogger logger;
  logger.reference = ctx.reference;
  logger.ground_truth = ctx.ground_truth;
  logger.data_range = ctx.data_range;
  logger.log_every = ctx.log_every;

  try {
    Problem const problem = cell_problem(ctx, cell);
    out.record = run_algorithm(alg, config, problem, ctx.x0, logger).record;
  } catch (DivergenceError const &e) {
    out.diverged = true;
    out.error = e.what();
    out.record = e.partial;
  }
  return out;
}

SweepReport run_sweep(SweepGrid const &grid, SweepContext const &ctx, std::optional<std::filesystem::path> const &output_dir,
                      int const jobs)
{
  ctx.stopping.validate();
  SweepReport report;
  report.tolerances = grid.tolerances;
  std::vector<SweepCell> const cells = expand_grid(grid);
  report.cells.resize(cells.size());

  SweepContext local = ctx;
  double smallest = grid.tolerances.front();
  for (double const t : grid.tolerances) { smallest = std::min(smallest, t); }
  local.stopping.tolerance = smallest;

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < cells.size(); i = next++) { report.cells[i] = run_cell(local, cells[i]); }
  };
  int const n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) { pool.emplace_back(worker); }
  }

  if (output_dir) {
    std::filesystem::create_directories(*output_dir);
    for (auto const &c : report.cells) {
      std::ofstream f(*output_dir / ("cell_" + c.cell.label() + ".csv"));
      write_csv(f, c.record);
    }
    std::ofstream summary(*output_dir / "summary.csv");
    write_summary(summary, report);
    std::ofstream speedups(*output_dir / "speedups.csv");
    write_speedups(speedups, report);
    std::ofstream curves(*output_dir / "curves.dat");
    write_curves(curves, report);
  }
  return report;
}

void write_summary(std::ostream &os, SweepReport const &report)
{
  os << "algorithm,N,p,inner_iterations,seed,gamma,tolerance,time_to_eps,K,data_passes_to_eps,prox_calls_to_eps,"
        "prox_calls_total,final_rel_err,status\n";
  for (auto const &c : report.cells) {
    auto const &rows = c.record.rows;
    std::int64_t const prox_total = rows.empty() ? 0 : rows.back().prox_calls;
    std::string const final_err = (!rows.empty() && rows.back().rel_err) ? fmt_double(*rows.back().rel_err) : std::string();
    for (double const tol : report.tolerances) {
      os << c.cell.algorithm << ',' << c.cell.n_subsets << ',' << fmt_short(c.cell.p) << ',' << c.cell.inner_iterations << ','
         << c.cell.seed << ',' << fmt_double(c.gamma) << ',' << fmt_short(tol) << ',';
      if (RunRow const *hit = c.record.first_below(tol)) {
        os << fmt_double(hit->wall_seconds) << ',' << hit->iteration << ',' << fmt_double(hit->data_passes) << ','
           << hit->prox_calls;
      } else {
        os << kNotReached << ',' << kNotReached << ',' << kNotReached << ',' << kNotReached;
      }
      os << ',' << prox_total << ',' << final_err << ',' << (c.diverged ? "diverged" : "ok") << '\n';
    }
  }
}

void write_speedups(std::ostream &os, SweepReport const &report)
{
  os << "algorithm,baseline,N,p,inner_iterations,seed,tolerance,time_skip,time_nonskip,speedup\n";
  for (auto const &c : report.cells) {
    Algorithm const alg = algorithm_from_name(c.cell.algorithm);
    if (!alg.skip) { continue; }
    std::string const base = alg.non_skip_name();
    for (auto const &d : report.cells) {
      if (d.cell.algorithm != base || d.cell.n_subsets != c.cell.n_subsets ||
          d.cell.inner_iterations != c.cell.inner_iterations || d.cell.seed != c.cell.seed) {
        continue;
      }
      for (double const tol : report.tolerances) {
        RunRow const *s = c.record.first_below(tol);
        RunRow const *n = d.record.first_below(tol);
        os << c.cell.algorithm << ',' << base << ',' << c.cell.n_subsets << ',' << fmt_short(c.cell.p) << ','
           << c.cell.inner_iterations << ',' << c.cell.seed << ',' << fmt_short(tol) << ','
           << (s ? fmt_double(s->wall_seconds) : kNotReached) << ',' << (n ? fmt_double(n->wall_seconds) : kNotReached) << ',';
        if (s && n && s->wall_seconds > 0.0) {
          os << fmt_double(n->wall_seconds / s->wall_seconds);
        } else {
          os << kNotReached;
        }
        os << '\n';
      }
    }
  }
}

void write_curves(std::ostream &os, SweepReport const &report)
{
  bool first = true;
  for (auto const &c : report.cells) {
    if (!first) { os << "\n\n"; }
    first = false;
    os << "# " << c.cell.label() << '\n';
    for (auto const &r : c.record.rows) {
      os << fmt_double(r.wall_seconds) << ' ' << (r.rel_err ? fmt_double(*r.rel_err) : std::string("nan")) << ' '
         << fmt_double(r.data_passes) << '\n';
    }
  }
}

std::optional<double> rel_err_at_passes(RunRecord const &record, double const passes)
{
  auto const &rows = record.rows;
  for (size_t i = 0; i + 1 < rows.size(); ++i) {
    auto const &a = rows[i];
    auto const &b = rows[i + 1];
    if (!a.rel_err || !b.rel_err) { continue; }
    if (passes >= a.data_passes && passes <= b.data_passes) {
      double const span = b.data_passes - a.data_passes;
      double const f = span > 0.0 ? (passes - a.data_passes) / span : 0.0;
      return (1.0 - f) * *a.rel_err + f * *b.rel_err;
    }
  }
  if (!rows.empty() && rows.back().rel_err && passes == rows.back().data_passes) { return rows.back().rel_err; }
  return std::nullopt;
}

} // namespace proxskip
