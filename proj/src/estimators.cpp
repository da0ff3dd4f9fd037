#include "proxskip/estimators.hpp"

#include <iostream>

namespace proxskip {

LeastSquaresData::LeastSquaresData(std::shared_ptr<ParallelProjector const> projector, SinoMatrix measured,
                                   SubsetPartition partition)
  : projector_(std::move(projector))
  , measured_(std::move(measured))
  , partition_(std::move(partition))
{
  auto const &g = projector_->geometry();
  if (measured_.rows() != g.n_angles() || measured_.cols() != g.n_bins) {
    throw ShapeError("measured sinogram does not match the projector geometry");
  }
  if (partition_.n_angles() != g.n_angles()) { throw ShapeError("partition does not cover the geometry's angles"); }
  measured_subsets_.reserve(static_cast<size_t>(partition_.n_subsets()));
  for (auto const &s : partition_.subsets()) { measured_subsets_.push_back(restrict_rows(measured_, s)); }
}

Image LeastSquaresData::subset_gradient(Image const &x, Index const subset) const
{
  auto const angles = partition_.subset(subset);
  SinoMatrix const residual = projector_->forward(x, angles) - measured_subsets_[static_cast<size_t>(subset)];
  return projector_->adjoint(residual, angles);
}

double LeastSquaresData::value(Image const &x) const
{
  return 0.5 * (projector_->forward(x) - measured_).squaredNorm();
}

Image full_gradient(Image const &x, LeastSquaresData const &data, bool const partitioned)
{
  auto const &A = data.projector();
  if (!partitioned) { return A.adjoint(A.forward(x) - data.measured()); }
  Image out = Image::Zero(x.rows(), x.cols());
  for (Index i = 0; i < data.n_subsets(); ++i) {
    auto const angles = data.partition().subset(i);
    A.adjoint_accumulate(A.forward(x, angles) - restrict_rows(data.measured(), angles), angles, out);
  }
  return out;
}

std::string to_string(EstimatorKind const kind)
{
  switch (kind) {
  case EstimatorKind::Full: return "full";
  case EstimatorKind::Sgd: return "sgd";
  case EstimatorKind::Saga: return "saga";
  case EstimatorKind::Svrg: return "svrg";
  case EstimatorKind::Lsvrg: return "lsvrg";
  }
  return "unknown";
}

EstimatorKind estimator_kind_from_string(std::string const &name)
{
  if (name == "full") { return EstimatorKind::Full; }
  if (name == "sgd") { return EstimatorKind::Sgd; }
  if (name == "saga") { return EstimatorKind::Saga; }
  if (name == "svrg") { return EstimatorKind::Svrg; }
  if (name == "lsvrg") { return EstimatorKind::Lsvrg; }
  throw ParameterError("unknown estimator '" + name + "'");
}

SagaState SagaState::zeros(Index const n_subsets, Index const width, Index const height)
{
  SagaState st;
  st.table.assign(static_cast<size_t>(n_subsets), Image::Zero(height, width));
  st.running_sum = Image::Zero(height, width);
  return st;
}

double SagaState::running_sum_drift() const
{
  Image fresh = Image::Zero(running_sum.rows(), running_sum.cols());
  for (auto const &v : table) { fresh += v; }
  double const scale = std::max(fresh.norm(), running_sum.norm());
  return scale == 0.0 ? 0.0 : (fresh - running_sum).norm() / scale;
}

std::size_t saga_table_bytes(Index const n_subsets, Index const width, Index const height)
{
  return static_cast<std::size_t>(n_subsets + 1) * static_cast<std::size_t>(width * height) * sizeof(double);
}

SvrgState SvrgState::at(Image const &x, LeastSquaresData const &data)
{
  SvrgState st;
  st.refresh(x, data);
  return st;
}

void SvrgState::refresh(Image const &x, LeastSquaresData const &data)
{
  snapshot = x;
  full_grad = full_gradient(x, data, true);
  iterations_since_refresh = 0;
}

namespace {

void check_subset(Index const subset, LeastSquaresData const &data)
{
  if (subset < 0 || subset >= data.n_subsets()) {
    throw ParameterError("subset index " + std::to_string(subset) + " outside [0, " + std::to_string(data.n_subsets()) + ")");
  }
}

} // namespace

Image sgd_estimate(Image const &x, Index const subset, LeastSquaresData const &data)
{
  check_subset(subset, data);
  auto const n = static_cast<double>(data.n_subsets());
  return n * data.subset_gradient(x, subset);
}

Image saga_estimate_update(Image const &x, Index const subset, SagaState &state, LeastSquaresData const &data)
{
  check_subset(subset, data);
  if (state.table.size() != static_cast<size_t>(data.n_subsets())) { throw StaleStateError("SAGA table has the wrong size"); }
  auto const n = static_cast<double>(data.n_subsets());
  Image grad = data.subset_gradient(x, subset);
  Image &slot = state.table[static_cast<size_t>(subset)];
  // N g - (N v - v_bar) is N (g - v) + v_bar rearranged so that N = 1 gives g exactly.
  Image estimate = n * grad - (n * slot - state.running_sum);
  state.running_sum -= slot;
  state.running_sum += grad;
  slot = std::move(grad);
  return estimate;
}

Image svrg_estimate(Image const &x, Index const subset, SvrgState const &state, LeastSquaresData const &data)
{
  check_subset(subset, data);
  if (state.stale()) { throw StaleStateError("SVRG snapshot is missing or overdue for a refresh"); }
  if (x == state.snapshot) { return state.full_grad; }
  auto const n = static_cast<double>(data.n_subsets());
  return n * data.subset_gradient(x, subset) - (n * data.subset_gradient(state.snapshot, subset) - state.full_grad);
}

bool refresh_policy(EstimatorKind const kind, SvrgState const &state, std::mt19937_64 &rng)
{
  switch (kind) {
  case EstimatorKind::Svrg: return state.iterations_since_refresh >= state.refresh_period;
  case EstimatorKind::Lsvrg: return std::bernoulli_distribution(state.refresh_probability)(rng);
  default: return false;
  }
}

std::mt19937_64 make_stream(std::uint64_t const seed, std::uint64_t const stream_id)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

GradientEstimator::GradientEstimator(EstimatorKind const kind, LeastSquaresData const &data, Image const &x0,
                                     std::uint64_t const seed, std::size_t const saga_memory_cap)
  : kind_(kind)
  , data_(data)
  , sampler_(make_stream(seed, kSamplerStream))
  , refresher_(make_stream(seed, kRefreshStream))
{
  if (x0.rows() != data.height() || x0.cols() != data.width()) { throw ShapeError("initial image does not match the problem"); }
  Index const n = data.n_subsets();
  switch (kind_) {
  case EstimatorKind::Saga:
    if (saga_table_bytes(n, data.width(), data.height()) > saga_memory_cap) {
      saga_memory_warning_ = true;
      std::clog << "warning: SAGA gradient table needs " << saga_table_bytes(n, data.width(), data.height())
                << " bytes, above the configured cap of " << saga_memory_cap << '\n';
    }
    saga_ = SagaState::zeros(n, data.width(), data.height());
    break;
  case EstimatorKind::Svrg:
  case EstimatorKind::Lsvrg:
    svrg_ = SvrgState::at(x0, data);
    if (kind_ == EstimatorKind::Svrg) {
      svrg_.refresh_period = n;
    } else {
      svrg_.refresh_probability = 1.0 / static_cast<double>(n);
    }
    full_evals_ += 1;
    break;
  default: break;
  }
}

Image GradientEstimator::estimate(Image const &x)
{
  if (kind_ == EstimatorKind::Full) {
    full_evals_ += 1;
    return full_gradient(x, data_);
  }

  if (kind_ == EstimatorKind::Svrg || kind_ == EstimatorKind::Lsvrg) {
    if (refresh_policy(kind_, svrg_, refresher_)) {
      svrg_.refresh(x, data_);
      full_evals_ += 1;
    }
  }

  std::uniform_int_distribution<Index> pick(0, data_.n_subsets() - 1);
  last_subset_ = pick(sampler_);

  switch (kind_) {
  case EstimatorKind::Sgd: subset_evals_ += 1; return sgd_estimate(x, last_subset_, data_);
  case EstimatorKind::Saga: subset_evals_ += 1; return saga_estimate_update(x, last_subset_, saga_, data_);
  default: {
    if (x != svrg_.snapshot) { subset_evals_ += 2; }
    Image g = svrg_estimate(x, last_subset_, svrg_, data_);
    svrg_.iterations_since_refresh += 1;
    return g;
  }
  }
}

double GradientEstimator::data_passes() const
{
  return static_cast<double>(full_evals_) +
         static_cast<double>(subset_evals_) / static_cast<double>(data_.n_subsets());
}

} // namespace proxskip
