#include "drgrad/optim.hpp"

#include <cmath>

namespace drgrad {

Vector mean_grad(const GradFn& grad_fn, const std::vector<int>& indices,
                 const Vector& theta) {
  if (indices.empty()) throw EmptyInputError("mean_grad: empty index list");
  Vector sum = grad_fn(indices[0], theta);
  for (std::size_t k = 1; k < indices.size(); ++k)
    sum += grad_fn(indices[k], theta);
  return sum / static_cast<double>(indices.size());
}

std::string to_string(OptKind kind) {
  switch (kind) {
    case OptKind::Sgd: return "sgd";
    case OptKind::IwSgd: return "iw_sgd";
    case OptKind::Momentum: return "momentum";
    case OptKind::Svrg: return "svrg";
    case OptKind::Saga: return "saga";
    case OptKind::Sag: return "sag";
    case OptKind::Sdrg: return "sdrg";
  }
  return "?";
}

OptKind opt_kind_from_string(const std::string& s) {
  for (OptKind k : all_opt_kinds())
    if (to_string(k) == s) return k;
  throw ConfigError("unknown optimizer kind: " + s);
}

std::vector<OptKind> all_opt_kinds() {
  return {OptKind::Sgd,  OptKind::IwSgd, OptKind::Momentum, OptKind::Svrg,
          OptKind::Saga, OptKind::Sag,   OptKind::Sdrg};
}

void OptimizerConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("lr must be > 0");
  if (momentum_gamma < 0.0 || momentum_gamma >= 1.0)
    throw ConfigError("momentum_gamma must be in [0, 1)");
  if (snapshot_period < 1) throw ConfigError("snapshot_period must be >= 1");
  if (alpha <= 0.0 || beta <= 0.0) throw ConfigError("alpha, beta must be > 0");
}

ControlVariateState init_svrg_state() {
  ControlVariateState s;
  s.svrg_ready = true;  // snapshot is taken on the first step (t mod m == 0)
  return s;
}

ControlVariateState init_table_state(long n, Eigen::Index dim,
                                     double table_cap_mb) {
  const double mb = static_cast<double>(n) * static_cast<double>(dim) *
                    sizeof(double) / (1024.0 * 1024.0);
  if (mb > table_cap_mb)
    throw ConfigError("gradient table needs " + std::to_string(mb) +
                      " MiB, over the cap of " + std::to_string(table_cap_mb));
  ControlVariateState s;
  s.n = n;
  s.saga_table = Matrix::Zero(n, dim);
  s.saga_sum = Vector::Zero(dim);
  s.table_ready = true;
  return s;
}

ControlVariateState init_sdrg_state(int num_classes, const Vector& theta0) {
  ControlVariateState s;
  s.sdrg_snapshots.assign(num_classes, theta0);
  s.sdrg_momentum.assign(num_classes, Vector::Zero(theta0.size()));
  s.sdrg_ready = true;
  return s;
}

GradEstimate step_sgd(const GradFn& grad_fn, const Vector& theta,
                      const MiniBatch& batch) {
  return {mean_grad(grad_fn, batch.indices, theta), {}};
}

GradEstimate step_iw_sgd(const GradFn& grad_fn, const Vector& theta,
                         const MiniBatch& batch, const ClassWeights& weights) {
  Vector acc = Vector::Zero(theta.size());
  int nonempty = 0;
  for (std::size_t c = 0; c < batch.by_class.size(); ++c) {
    if (batch.by_class[c].empty()) continue;
    acc += weights.at(static_cast<int>(c)) *
           mean_grad(grad_fn, batch.by_class[c], theta);
    ++nonempty;
  }
  return {acc / static_cast<double>(nonempty), {}};
}

GradEstimate step_momentum(const GradFn& grad_fn, const Vector& theta,
                           const MiniBatch& batch, const Vector& prev_delta,
                           const OptimizerConfig& config) {
  return {config.momentum_eta * mean_grad(grad_fn, batch.indices, theta) +
              config.momentum_gamma * prev_delta,
          {}};
}

GradEstimate step_generic_cv(const GradFn& grad_fn, const Vector& theta,
                             const MiniBatch& batch, CvSchedule schedule,
                             ControlVariateState& state,
                             const OptimizerConfig& config, long t) {
  if (schedule == CvSchedule::Svrg) {
    if (!state.svrg_ready) throw StateError("SVRG state not initialized");
    if (t % config.snapshot_period == 0 || state.svrg_snapshot.size() == 0) {
      state.svrg_snapshot = theta;
      std::vector<int> all(static_cast<std::size_t>(state.n));
      if (state.n <= 0) throw StateError("SVRG state missing dataset size");
      for (long i = 0; i < state.n; ++i) all[i] = static_cast<int>(i);
      state.svrg_mean_g = mean_grad(grad_fn, all, state.svrg_snapshot);
    }
    Vector delta = mean_grad(grad_fn, batch.indices, theta) -
                   mean_grad(grad_fn, batch.indices, state.svrg_snapshot) +
                   state.svrg_mean_g;
    return {std::move(delta), {}};
  }

  if (!state.table_ready) throw StateError("gradient table not initialized");
  const double n = static_cast<double>(state.n);
  Vector g_batch = Vector::Zero(theta.size());
  for (int i : batch.indices) g_batch += state.saga_table.row(i).transpose();
  g_batch /= static_cast<double>(batch.size());
  const Vector mean_table = state.saga_sum / n;

  Vector grad_now = mean_grad(grad_fn, batch.indices, theta);
  Vector delta = schedule == CvSchedule::Saga
                     ? Vector(grad_now - g_batch + mean_table)
                     : Vector((grad_now - g_batch) / n + mean_table);

  // table rows for the sampled examples are refreshed after the estimate
  for (int i : batch.indices) {
    Vector g_i = grad_fn(i, theta);
    state.saga_sum += g_i - state.saga_table.row(i).transpose();
    state.saga_table.row(i) = g_i.transpose();
  }
  return {std::move(delta), {}};
}

GradEstimate step_sdrg(const GradFn& grad_fn, const Vector& theta,
                       const MiniBatch& batch, const ClassWeights& weights,
                       ControlVariateState& state,
                       const OptimizerConfig& config, long t) {
  if (!state.sdrg_ready) throw StateError("SDRG state not initialized");
  if (t % config.snapshot_period == 0)
    for (Vector& snap : state.sdrg_snapshots) snap = theta;

  GradEstimate est;
  est.per_class_term_norms.assign(batch.by_class.size(), 0.0);
  Vector acc = Vector::Zero(theta.size());
  int nonempty = 0;
  for (std::size_t c = 0; c < batch.by_class.size(); ++c) {
    if (batch.by_class[c].empty()) continue;  // accumulator left untouched
    const double w = weights.at(static_cast<int>(c));
    const Vector mg_theta = mean_grad(grad_fn, batch.by_class[c], theta);
    Vector& mom = state.sdrg_momentum[c];
    if (config.momentum_update_first)
      mom = config.momentum_eta * mg_theta + config.momentum_gamma * mom;
    const Vector mg_snap =
        mean_grad(grad_fn, batch.by_class[c], state.sdrg_snapshots[c]);
    // a*x - b*y + c*z per coordinate: when mg_snap == mg_theta the first
    // two terms cancel exactly and the collapse to beta*mom is bitwise.
    Vector term = config.alpha * w * mg_theta - config.beta * w * mg_snap +
                  config.beta * mom;
    if (!config.momentum_update_first)
      mom = config.momentum_eta * mg_theta + config.momentum_gamma * mom;
    est.per_class_term_norms[c] = term.norm();
    acc += term;
    ++nonempty;
  }
  est.delta = acc / static_cast<double>(nonempty);
  return est;
}

Vector apply_update(const Vector& theta, const GradEstimate& estimate,
                    double lr, long t) {
  if (estimate.delta.size() != theta.size())
    throw DimensionError("apply_update: delta/theta size mismatch");
  if (lr == 0.0) return theta;
  Vector out = theta - lr * estimate.delta;
  if (!all_finite(out)) throw NumericError("non-finite parameter update", t);
  return out;
}

Optimizer::Optimizer(const OptimizerConfig& config, long n, Eigen::Index dim,
                     int num_classes, const Vector& theta0)
    : config_(config), n_(n) {
  config_.validate();
  switch (config_.kind) {
    case OptKind::Svrg:
      state_ = init_svrg_state();
      state_.n = n;
      break;
    case OptKind::Saga:
    case OptKind::Sag:
      state_ = init_table_state(n, dim, config_.table_cap_mb);
      break;
    case OptKind::Sdrg:
      state_ = init_sdrg_state(num_classes, theta0);
      break;
    case OptKind::Momentum:
      prev_delta_ = Vector::Zero(theta0.size());
      break;
    default:
      break;
  }
}

GradEstimate Optimizer::step(const GradFn& grad_fn, const Vector& theta,
                             const MiniBatch& batch,
                             const ClassWeights& weights, long t) {
  switch (config_.kind) {
    case OptKind::Sgd:
      return step_sgd(grad_fn, theta, batch);
    case OptKind::IwSgd:
      return step_iw_sgd(grad_fn, theta, batch, weights);
    case OptKind::Momentum: {
      GradEstimate est = step_momentum(grad_fn, theta, batch, prev_delta_,
                                       config_);
      prev_delta_ = est.delta;
      return est;
    }
    case OptKind::Svrg:
      return step_generic_cv(grad_fn, theta, batch, CvSchedule::Svrg, state_,
                             config_, t);
    case OptKind::Saga:
      return step_generic_cv(grad_fn, theta, batch, CvSchedule::Saga, state_,
                             config_, t);
    case OptKind::Sag:
      return step_generic_cv(grad_fn, theta, batch, CvSchedule::Sag, state_,
                             config_, t);
    case OptKind::Sdrg:
      return step_sdrg(grad_fn, theta, batch, weights, state_, config_, t);
  }
  throw ConfigError("unhandled optimizer kind");
}

double Optimizer::effective_lr() const {
  return config_.kind == OptKind::Momentum ? 1.0 : config_.lr;
}

}  // namespace drgrad
