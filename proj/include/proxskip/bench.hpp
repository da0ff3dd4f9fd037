#pragma once

#include "proxskip/solvers.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace proxskip {

/// Stop when the squared relative error drops below `tolerance`, or when a
/// budget runs out. At least one budget must be finite.
struct StoppingRule
{
  double tolerance = 1e-5;
  double max_data_passes = 200.0;
  std::optional<double> time_budget;

  void validate() const;
};

struct SweepGrid
{
  std::vector<std::string> algorithms{"proxsvrg", "proxsvrgskip"};
  std::vector<Index> n_subsets{10};
  std::vector<double> probabilities{0.1};
  std::vector<int> inner_iterations{10};
  int repetitions = 1;
  std::vector<std::uint64_t> seeds; // overrides repetitions when set
  std::vector<double> tolerances{1e-3};

  void validate() const;
  std::vector<std::uint64_t> seed_list() const;
};

/// Everything a sweep cell shares: the measurements, the forward model, the
/// regulariser template and the quantities runs are scored against.
struct SweepContext
{
  std::shared_ptr<ParallelProjector const> projector;
  SinoMatrix measured;
  Regularizer regularizer;      // TV alpha/nonneg or denoiser; inner iterations come from the grid
  std::optional<Image> reference; // x* (TV mode)
  std::optional<Image> ground_truth;
  double data_range = 1.0;
  double lipschitz = 1.0;
  Image x0;
  StoppingRule stopping;
  double log_every = 1.0;
  std::map<std::string, double> step_overrides; // algorithm name -> gamma
};

struct SweepCell
{
  std::string algorithm;
  Index n_subsets = 1;
  double p = 1.0;
  int inner_iterations = 10;
  std::uint64_t seed = 0;

  std::string label() const;
};

/// All cells of the grid. Deterministic methods collapse the N axis to 1 and
/// non-skipped methods the p axis to 1.
std::vector<SweepCell> expand_grid(SweepGrid const &grid);

struct CellOutcome
{
  SweepCell cell;
  double gamma = 0.0;
  RunRecord record;
  bool diverged = false;
  std::string error;
};

struct SweepReport
{
  std::vector<double> tolerances;
  std::vector<CellOutcome> cells;
};

/// Problem for one cell (regulariser strength adjusted for skipping in PnP mode).
Problem cell_problem(SweepContext const &ctx, SweepCell const &cell);

CellOutcome run_cell(SweepContext const &ctx, SweepCell const &cell);

/// Runs every cell, `jobs` at a time, each with isolated state and seeds. When
/// `output_dir` is set, writes one CSV per cell, summary.csv, speedups.csv and
/// curves.dat there.
SweepReport run_sweep(SweepGrid const &grid, SweepContext const &ctx, std::optional<std::filesystem::path> const &output_dir,
                      int jobs = 1);

inline constexpr char const *kNotReached = "--";

/// Columns: algorithm,N,p,inner_iterations,seed,gamma,tolerance,time_to_eps,
/// K,data_passes_to_eps,prox_calls_to_eps,prox_calls_total,final_rel_err,status.
void write_summary(std::ostream &os, SweepReport const &report);

/// time-to-eps(non-skip) / time-to-eps(skip) for every skipped cell with a
/// non-skipped partner at equal (N, inner iterations, seed).
void write_speedups(std::ostream &os, SweepReport const &report);

/// Gnuplot-friendly: one block per cell ("# label"), columns wall_seconds
/// rel_err data_passes, blocks separated by two blank lines.
void write_curves(std::ostream &os, SweepReport const &report);

/// Linear interpolation of rel_err at the given data-pass count (nullopt if
/// outside the recorded range or unavailable).
std::optional<double> rel_err_at_passes(RunRecord const &record, double passes);

} // namespace proxskip
