#pragma once

#include "proxskip/projector.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace proxskip {

/// f(x) = 0.5 ||Ax - b||^2 = sum_i f_i(x), with f_i(x) = 0.5 ||A_i x - b_i||^2
/// over the angle subsets of a partition.
class LeastSquaresData
{
public:
  LeastSquaresData(std::shared_ptr<ParallelProjector const> projector, SinoMatrix measured, SubsetPartition partition);

  ParallelProjector const &projector() const { return *projector_; }
  std::shared_ptr<ParallelProjector const> projector_ptr() const { return projector_; }
  SinoMatrix const &measured() const { return measured_; }
  SubsetPartition const &partition() const { return partition_; }
  Index n_subsets() const { return partition_.n_subsets(); }
  Index width() const { return projector_->width(); }
  Index height() const { return projector_->height(); }

  /// A_i^T (A_i x - b_i).
  Image subset_gradient(Image const &x, Index subset) const;
  double value(Image const &x) const;

private:
  std::shared_ptr<ParallelProjector const> projector_;
  SinoMatrix measured_;
  SubsetPartition partition_;
  std::vector<SinoMatrix> measured_subsets_;
};

/// A^T (Ax - b). With `partitioned`, accumulated as sum_i A_i^T (A_i x - b_i).
Image full_gradient(Image const &x, LeastSquaresData const &data, bool partitioned = false);

enum class EstimatorKind
{
  Full,
  Sgd,
  Saga,
  Svrg,
  Lsvrg
};

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(std::string const &name);

struct StaleStateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Gradient table v^i and its running sum v_bar = sum_i v^i.
struct SagaState
{
  std::vector<Image> table;
  Image running_sum;

  static SagaState zeros(Index n_subsets, Index width, Index height);
  /// Relative mismatch between running_sum and a fresh sum of the table.
  double running_sum_drift() const;
};

/// Bytes held by a SAGA table for the given shape.
std::size_t saga_table_bytes(Index n_subsets, Index width, Index height);

struct SvrgState
{
  Image snapshot;
  Image full_grad;
  Index iterations_since_refresh = 0;
  Index refresh_period = 0;         // SVRG: N; 0 means no fixed schedule
  double refresh_probability = 0.0; // LSVRG: 1/N

  static SvrgState at(Image const &x, LeastSquaresData const &data);
  bool stale() const { return snapshot.size() == 0 || (refresh_period > 0 && iterations_since_refresh > refresh_period); }
  void refresh(Image const &x, LeastSquaresData const &data);
};

/// N A_i^T (A_i x - b_i).
Image sgd_estimate(Image const &x, Index subset, LeastSquaresData const &data);

/// N (grad f_i(x) - v^i) + v_bar; then v^i <- grad f_i(x) and the running sum
/// is updated in place.
Image saga_estimate_update(Image const &x, Index subset, SagaState &state, LeastSquaresData const &data);

/// N (grad f_i(x) - grad f_i(snapshot)) + grad f(snapshot). Returns the stored
/// full gradient directly when x is the snapshot. Does not touch `state`;
/// throws StaleStateError when the refresh schedule was not honoured.
Image svrg_estimate(Image const &x, Index subset, SvrgState const &state, LeastSquaresData const &data);

/// True when the caller must refresh the snapshot before this iteration:
/// SVRG when iterations_since_refresh >= refresh_period, LSVRG with
/// probability refresh_probability drawn from `rng`.
bool refresh_policy(EstimatorKind kind, SvrgState const &state, std::mt19937_64 &rng);

/// Seeded stream for one purpose of one run. Different stream ids give
/// independent generators for the same seed.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream_id);

enum : std::uint64_t
{
  kSamplerStream = 1,
  kSkipStream = 2,
  kRefreshStream = 3
};

/// Estimator G_k for one solver run: owns the estimator memory and the
/// subset sampler, and counts gradient work in full and subset evaluations.
class GradientEstimator
{
public:
  GradientEstimator(EstimatorKind kind, LeastSquaresData const &data, Image const &x0, std::uint64_t seed,
                    std::size_t saga_memory_cap = std::size_t{1} << 30);

  EstimatorKind kind() const { return kind_; }
  Image estimate(Image const &x);

  std::int64_t full_evaluations() const { return full_evals_; }
  std::int64_t subset_evaluations() const { return subset_evals_; }
  /// Full gradient or snapshot refresh = 1 pass, subset gradient = 1/N.
  double data_passes() const;
  Index last_subset() const { return last_subset_; }
  bool saga_memory_warning() const { return saga_memory_warning_; }

  SagaState const &saga() const { return saga_; }
  SvrgState const &svrg() const { return svrg_; }

private:
  EstimatorKind kind_;
  LeastSquaresData const &data_;
  std::mt19937_64 sampler_;
  std::mt19937_64 refresher_;
  SagaState saga_;
  SvrgState svrg_;
  std::int64_t full_evals_ = 0;
  std::int64_t subset_evals_ = 0;
  Index last_subset_ = -1;
  bool saga_memory_warning_ = false;
};

} // namespace proxskip
