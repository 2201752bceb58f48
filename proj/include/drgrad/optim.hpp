#ifndef DRGRAD_OPTIM_HPP
#define DRGRAD_OPTIM_HPP

#include <functional>
#include <string>
#include <vector>

#include "drgrad/sampling.hpp"
#include "drgrad/tensor.hpp"

namespace drgrad {

// Per-example gradient source; lets the same steps drive classifier models
// and closed-form toy problems.
using GradFn = std::function<Vector(int index, const Vector& theta)>;

// Mean gradient over the given dataset indices, accumulated in list order.
Vector mean_grad(const GradFn& grad_fn, const std::vector<int>& indices,
                 const Vector& theta);

enum class OptKind { Sgd, IwSgd, Momentum, Svrg, Saga, Sag, Sdrg };

std::string to_string(OptKind kind);
OptKind opt_kind_from_string(const std::string& s);
std::vector<OptKind> all_opt_kinds();

struct OptimizerConfig {
  OptKind kind = OptKind::Sgd;
  double lr = 0.01;
  int snapshot_period = 50;    // m
  double momentum_gamma = 0.9; // gamma
  double momentum_eta = 0.1;   // eta_m, distinct from lr
  double alpha = 1.0;          // scale on the weighted gradient term
  double beta = 1.0;           // scale on the control-variate correction
  WeightMode weight_mode = WeightMode::Unit;
  std::uint64_t misspec_seed = 0;
  bool momentum_update_first = true;  // update g^t before forming delta
  double table_cap_mb = 1024.0;       // SAGA/SAG gradient table limit

  void validate() const;
};

struct GradEstimate {
  Vector delta;                             // before lr scaling
  std::vector<double> per_class_term_norms; // SDRG diagnostics
};

// w * grad - (w * g_i - g_expect): the weight-corrected control-variate
// gradient; every doubly-robust check reduces to this form.
inline Vector weighted_cv_delta(double w, const Vector& grad, const Vector& g_i,
                                const Vector& g_expect) {
  return w * grad - (w * g_i - g_expect);
}

enum class CvSchedule { Svrg, Saga, Sag };

struct ControlVariateState {
  long n = 0;  // dataset size
  // SVRG
  Vector svrg_snapshot;
  Vector svrg_mean_g;
  bool svrg_ready = false;
  // SAGA/SAG gradient table, one row per example, rows start at zero
  Matrix saga_table;
  Vector saga_sum;  // running column sum of the table
  bool table_ready = false;
  // SDRG per-class snapshots and momentum accumulators
  std::vector<Vector> sdrg_snapshots;
  std::vector<Vector> sdrg_momentum;
  bool sdrg_ready = false;
};

ControlVariateState init_svrg_state();
// Throws ConfigError when n*dim doubles exceed table_cap_mb.
ControlVariateState init_table_state(long n, Eigen::Index dim,
                                     double table_cap_mb);
ControlVariateState init_sdrg_state(int num_classes, const Vector& theta0);

GradEstimate step_sgd(const GradFn& grad_fn, const Vector& theta,
                      const MiniBatch& batch);

// (1/C') sum over nonempty classes of w_c * class-mean gradient.
GradEstimate step_iw_sgd(const GradFn& grad_fn, const Vector& theta,
                         const MiniBatch& batch, const ClassWeights& weights);

// delta = eta_m * batch gradient + gamma * prev_delta; applied with lr 1.
GradEstimate step_momentum(const GradFn& grad_fn, const Vector& theta,
                           const MiniBatch& batch, const Vector& prev_delta,
                           const OptimizerConfig& config);

// Control-variate step: grad(theta) - g(snapshot) + mean g, with the
// schedule's own snapshot/table refresh rules.
GradEstimate step_generic_cv(const GradFn& grad_fn, const Vector& theta,
                             const MiniBatch& batch, CvSchedule schedule,
                             ControlVariateState& state,
                             const OptimizerConfig& config, long t);

// Per-class doubly robust step with momentum-accumulator control variates.
GradEstimate step_sdrg(const GradFn& grad_fn, const Vector& theta,
                       const MiniBatch& batch, const ClassWeights& weights,
                       ControlVariateState& state,
                       const OptimizerConfig& config, long t);

// theta - lr * delta; throws NumericError when the result is not finite.
Vector apply_update(const Vector& theta, const GradEstimate& estimate,
                    double lr, long t = -1);

// Owns the per-trajectory state and dispatches on config.kind.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, long n, Eigen::Index dim,
            int num_classes, const Vector& theta0);

  GradEstimate step(const GradFn& grad_fn, const Vector& theta,
                    const MiniBatch& batch, const ClassWeights& weights,
                    long t);

  // Momentum bakes its step size into delta; everything else uses lr.
  double effective_lr() const;

  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  long n_;
  ControlVariateState state_;
  Vector prev_delta_;
};

}  // namespace drgrad

#endif  // DRGRAD_OPTIM_HPP
