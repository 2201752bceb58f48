#include "drgrad/verify.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

#include "drgrad/rng.hpp"

namespace drgrad {

bool VerifyReport::all_pass() const {
  for (const VerifyCheck& c : checks)
    if (!c.pass) return false;
  return true;
}

const VerifyCheck& VerifyReport::find(const std::string& name) const {
  for (const VerifyCheck& c : checks)
    if (c.name == name) return c;
  throw StateError("no verification check named " + name);
}

ClassDist skew_dist(int num_classes, int hot, double prob) {
  ClassDist d;
  d.probs = Vector::Constant(num_classes, (1.0 - prob) / (num_classes - 1));
  d.probs[hot] = prob;
  return d;
}

ToyProblem quadratic_fixture(const ClassDist& q) {
  Rng rng(11);
  std::vector<Vector> centers;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    Vector a(3);
    // distinct per-class offsets keep class-mean gradients apart
    const int c = i < 3 ? 0 : 1;
    for (int k = 0; k < 3; ++k)
      a[k] = (c == 0 ? -2.0 : 2.0) + rng.uniform(-0.5, 0.5);
    centers.push_back(a);
    labels.push_back(c);
  }
  return make_quadratic_problem(centers, labels, q, ClassDist::uniform(2));
}

namespace {

MiniBatch batch_of(const ToyProblem& prob, const std::vector<int>& indices,
                   long t = 1) {
  MiniBatch b;
  b.iteration = t;
  b.indices = indices;
  b.by_class.assign(prob.num_classes, {});
  for (int i : indices) b.by_class[prob.labels[i]].push_back(i);
  return b;
}

ClassWeights exact_weights(const ToyProblem& prob) {
  ClassWeights w;
  for (int c = 0; c < prob.num_classes; ++c)
    w.w.push_back(prob.p.probs[c] / prob.q.probs[c]);
  return w;
}

ClassWeights constant_weights(int num_classes, double value) {
  ClassWeights w;
  w.w.assign(num_classes, value);
  return w;
}

struct SuiteBuilder {
  VerifyReport report;
  std::map<OptKind, bool> exercised;

  SuiteBuilder() {
    for (OptKind k : all_opt_kinds()) exercised[k] = false;
  }

  void below(const std::string& name, double value, double threshold,
             std::initializer_list<OptKind> kinds, const std::string& detail) {
    report.checks.push_back({name, value < threshold, value, threshold, detail});
    for (OptKind k : kinds) exercised[k] = true;
  }
  void above(const std::string& name, double value, double threshold,
             std::initializer_list<OptKind> kinds, const std::string& detail) {
    report.checks.push_back({name, value > threshold, value, threshold, detail});
    for (OptKind k : kinds) exercised[k] = true;
  }
};

double fd_worst_over_random_triples(ModelKind kind, int samples) {
  ModelSpec spec;
  spec.kind = kind;
  spec.input_dim = kind == ModelKind::SoftmaxLinear ? 20 : 10;
  spec.hidden_dim = 8;
  spec.num_classes = kind == ModelKind::SoftmaxLinear ? 5 : 4;
  Rng rng(1234);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector theta = init_params(spec, rng.next_u64()).theta;
    for (Eigen::Index k = 0; k < theta.size(); ++k)
      theta[k] += rng.uniform(-0.5, 0.5);
    Example ex;
    ex.features = Vector(spec.input_dim);
    for (int k = 0; k < spec.input_dim; ++k) ex.features[k] = rng.uniform();
    ex.label = static_cast<int>(rng.index(spec.num_classes));
    // skip samples sitting on a ReLU kink
    if (min_abs_hidden_preactivation(spec, theta, ex) < 1e-6) {
      --s;
      continue;
    }
    worst = std::max(worst, fd_check(spec, theta, ex, 1e-5));
  }
  return worst;
}

}  // namespace

VerifyReport run_verification_suite() {
  SuiteBuilder sb;

  // --- gradient correctness -------------------------------------------
  sb.below("fd/softmax_linear",
           fd_worst_over_random_triples(ModelKind::SoftmaxLinear, 50), 1e-4,
           {}, "max relative error vs central differences, 50 triples");
  sb.below("fd/mlp_1hidden",
           fd_worst_over_random_triples(ModelKind::Mlp1Hidden, 50), 1e-4, {},
           "max relative error vs central differences, 50 triples");

  // --- fixtures ---------------------------------------------------------
  const ClassDist uniform2 = ClassDist::uniform(2);
  const ClassDist skew2 = skew_dist(2, 0, 0.8);
  const ToyProblem uni = quadratic_fixture(uniform2);
  const ToyProblem skew = quadratic_fixture(skew2);
  Rng theta_rng(99);
  Vector theta(3), theta_snap(3);
  for (int k = 0; k < 3; ++k) {
    theta[k] = theta_rng.uniform(-1.0, 1.0);
    theta_snap[k] = theta_rng.uniform(-1.0, 1.0);  // stale snapshot
  }
  const Vector ref_uni = uni.balanced_gradient(theta);
  const Vector ref_skew = skew.balanced_gradient(theta);

  // --- unbiasedness ------------------------------------------------------
  {
    auto est = [&](const std::vector<int>& b) {
      return step_sgd(uni.grad_fn, theta, batch_of(uni, b)).delta;
    };
    sb.below("unbiased/sgd_uniform",
             enumerate_mean(uni, est, ref_uni).bias_norm, 1e-12,
             {OptKind::Sgd}, "plain SGD under uniform sampling");
  }
  {
    auto est = [&](const std::vector<int>& b) {
      return step_sgd(skew.grad_fn, theta, batch_of(skew, b)).delta;
    };
    sb.above("biased/sgd_skew", enumerate_mean(skew, est, ref_skew).bias_norm,
             1e-3, {OptKind::Sgd}, "plain SGD under 0.8 skew is biased");
  }
  {
    OptimizerConfig cfg;
    cfg.snapshot_period = 1000;
    ControlVariateState base = init_svrg_state();
    base.n = uni.n();
    base.svrg_snapshot = theta_snap;
    std::vector<int> all(uni.n());
    for (int i = 0; i < uni.n(); ++i) all[i] = i;
    base.svrg_mean_g = mean_grad(uni.grad_fn, all, theta_snap);
    auto est = [&](const std::vector<int>& b) {
      ControlVariateState state = base;
      return step_generic_cv(uni.grad_fn, theta, batch_of(uni, b),
                             CvSchedule::Svrg, state, cfg, 1)
          .delta;
    };
    sb.below("unbiased/svrg", enumerate_mean(uni, est, ref_uni).bias_norm,
             1e-10, {OptKind::Svrg}, "SVRG delta with stale snapshot");
  }
  {
    OptimizerConfig cfg;
    ControlVariateState base = init_table_state(uni.n(), 3, 64.0);
    for (int i = 0; i < uni.n(); ++i) {
      Vector g = uni.grad_fn(i, theta_snap);
      base.saga_sum += g;
      base.saga_table.row(i) = g.transpose();
    }
    auto est = [&](const std::vector<int>& b) {
      ControlVariateState state = base;
      return step_generic_cv(uni.grad_fn, theta, batch_of(uni, b),
                             CvSchedule::Saga, state, cfg, 1)
          .delta;
    };
    sb.below("unbiased/saga", enumerate_mean(uni, est, ref_uni).bias_norm,
             1e-10, {OptKind::Saga}, "SAGA delta with stale gradient table");
  }
  {
    const ClassWeights w = exact_weights(skew);
    auto est = [&](const std::vector<int>& b) {
      return step_iw_sgd(skew.grad_fn, theta, batch_of(skew, b), w).delta;
    };
    sb.below("unbiased/iw_sgd_exact_skew",
             enumerate_mean(skew, est, ref_skew).bias_norm, 1e-10,
             {OptKind::IwSgd}, "IW-SGD, exact weights, 0.8 skew");
  }
  {
    const ClassWeights w = constant_weights(2, 1.0);
    auto est = [&](const std::vector<int>& b) {
      return step_iw_sgd(skew.grad_fn, theta, batch_of(skew, b), w).delta;
    };
    sb.above("biased/iw_sgd_unit_skew",
             enumerate_mean(skew, est, ref_skew).bias_norm, 1e-3,
             {OptKind::IwSgd}, "unit weights under 0.8 skew stay biased");
  }

  // --- double robustness --------------------------------------------------
  sb.below("dr/w_ok_g_bad",
           check_double_robustness(skew, DrScenario::WeightsOkCvBad, theta)
               .bias_norm,
           1e-10, {OptKind::Sdrg}, "exact weights, arbitrary control variates");
  sb.below("dr/w_bad_g_ok",
           check_double_robustness(skew, DrScenario::WeightsBadCvOk, theta)
               .bias_norm,
           1e-10, {OptKind::Sdrg}, "perturbed weights, exact control variates");
  sb.above("dr/both_bad",
           check_double_robustness(skew, DrScenario::BothBad, theta).bias_norm,
           1e-6, {OptKind::Sdrg}, "both models wrong on adversarial fixture");

  // --- SAG bias vs SAGA ----------------------------------------------------
  {
    const int n = uni.n();
    std::vector<Vector> zero_table(n, Vector::Zero(3));
    EstimatorReport sag = check_sag_bias(uni, zero_table, theta);
    const double closed_form =
        ((1.0 / n - 1.0) * ref_uni).norm();  // hand-expanded expectation
    sb.below("sag/closed_form", std::abs(sag.bias_norm - closed_form), 1e-10,
             {OptKind::Sag}, "zero-table SAG bias matches |(1/n - 1) mean|");
    sb.above("sag/biased", sag.bias_norm, 1e-6, {OptKind::Sag},
             "stale-table SAG is biased");

    auto saga_est = [&](const std::vector<int>& b) {
      OptimizerConfig cfg;
      ControlVariateState state = init_table_state(n, 3, 64.0);
      return step_generic_cv(uni.grad_fn, theta, batch_of(uni, b),
                             CvSchedule::Saga, state, cfg, 1)
          .delta;
    };
    sb.below("saga/fresh_unbiased",
             enumerate_mean(uni, saga_est, ref_uni).bias_norm, 1e-12,
             {OptKind::Saga}, "SAGA on the same zero-table state");

    // optim's SAG path against the oracle formula on one batch
    OptimizerConfig cfg;
    ControlVariateState state = init_table_state(n, 3, 64.0);
    for (int i = 0; i < n; ++i) {
      Vector g = uni.grad_fn(i, theta_snap);
      state.saga_sum += g;
      state.saga_table.row(i) = g.transpose();
    }
    const Vector mean_table = state.saga_sum / n;
    Vector expected = (uni.grad_fn(2, theta) - uni.grad_fn(2, theta_snap)) /
                          static_cast<double>(n) +
                      mean_table;
    Vector got = step_generic_cv(uni.grad_fn, theta, batch_of(uni, {2}),
                                 CvSchedule::Sag, state, cfg, 1)
                     .delta;
    sb.below("sag/step_matches_oracle", (got - expected).norm(), 1e-14,
             {OptKind::Sag}, "step_generic_cv SAG delta equals Eq. form");
  }

  // --- variance ordering ---------------------------------------------------
  {
    std::vector<int> all(uni.n());
    for (int i = 0; i < uni.n(); ++i) all[i] = i;
    const Vector full_mean = mean_grad(uni.grad_fn, all, theta);
    auto sgd_est = [&](const std::vector<int>& b) {
      return step_sgd(uni.grad_fn, theta, batch_of(uni, b)).delta;
    };
    auto svrg_fresh = [&](const std::vector<int>& b) {
      // snapshot equals the iterate: correction collapses to the full mean
      return Vector(uni.grad_fn(b[0], theta) - uni.grad_fn(b[0], theta) +
                    full_mean);
    };
    VarianceComparison cmp =
        compare_variance(uni, svrg_fresh, sgd_est, ref_uni);
    sb.below("variance/svrg_lt_sgd", cmp.trace_difference, 0.0,
             {OptKind::Svrg, OptKind::Sgd},
             "SVRG with fresh snapshot strictly beats plain SGD");

    auto zero_cv = [&](const std::vector<int>& b) {
      return Vector(uni.grad_fn(b[0], theta) - Vector::Zero(3) +
                    Vector::Zero(3));
    };
    VarianceComparison eq = compare_variance(uni, zero_cv, sgd_est, ref_uni);
    sb.below("variance/zero_cv_equals_sgd", std::abs(eq.trace_difference),
             1e-12, {}, "zero control variate is plain SGD");

    const ClassWeights w = exact_weights(skew);
    auto iw_est = [&](const std::vector<int>& b) {
      return step_iw_sgd(skew.grad_fn, theta, batch_of(skew, b), w).delta;
    };
    auto sdrg_fresh = [&](const std::vector<int>& b) {
      const int i = b[0];
      return weighted_cv_delta(w.at(skew.labels[i]), skew.grad_fn(i, theta),
                               skew.grad_fn(i, theta), ref_skew);
    };
    VarianceComparison dr = compare_variance(skew, sdrg_fresh, iw_est,
                                             ref_skew);
    sb.below("variance/sdrg_le_iw", dr.trace_difference, 1e-12,
             {OptKind::Sdrg, OptKind::IwSgd},
             "fresh-snapshot SDRG variance <= IW-SGD under skew");
  }

  // --- momentum equivalence (100-step trajectory match) --------------------
  {
    Rng rng(5);
    std::vector<Vector> centers;
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) {
      Vector a(3);
      for (int k = 0; k < 3; ++k) a[k] = rng.uniform(-2.0, 2.0);
      centers.push_back(a);
      labels.push_back(i % 2);
    }
    ToyProblem prob = make_quadratic_problem(centers, labels, uniform2,
                                             uniform2);
    OptimizerConfig cfg;
    cfg.momentum_eta = 0.1;
    cfg.momentum_gamma = 0.9;
    Vector theta_m = theta, theta_r = theta;
    Vector prev_m = Vector::Zero(3), prev_r = Vector::Zero(3);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const int i = static_cast<int>(rng.index(4));
      GradEstimate em = step_momentum(prob.grad_fn, theta_m,
                                      batch_of(prob, {i}, t), prev_m, cfg);
      prev_m = em.delta;
      theta_m = apply_update(theta_m, em, 1.0, t);

      // reduced configuration: g_i = g = gamma/(1-eta) * prev_delta, w = eta
      Vector cv = (cfg.momentum_gamma / (1.0 - cfg.momentum_eta)) * prev_r;
      Vector dr = weighted_cv_delta(cfg.momentum_eta,
                                    prob.grad_fn(i, theta_r), cv, cv);
      prev_r = dr;
      theta_r -= dr;
      worst = std::max(worst, (theta_m - theta_r).cwiseAbs().maxCoeff());
    }
    sb.below("momentum/equivalence", worst, 1e-12,
             {OptKind::Momentum, OptKind::Sdrg},
             "momentum vs reduced weight-corrected CV, 100 steps");
  }

  // --- SDRG collapse and frozen-snapshot expectation ------------------------
  {
    // gamma = 0, snapshots = theta, unit weights, alpha = beta = 1:
    // the step must equal the eta_m-weighted IW-SGD delta bitwise.
    OptimizerConfig cfg;
    cfg.momentum_gamma = 0.0;
    cfg.alpha = cfg.beta = 1.0;
    cfg.snapshot_period = 1000;
    ControlVariateState state = init_sdrg_state(2, theta);
    MiniBatch b = batch_of(uni, {0, 1, 3, 4});
    GradEstimate sdrg =
        step_sdrg(uni.grad_fn, theta, b, constant_weights(2, 1.0), state, cfg,
                  1);
    GradEstimate iw = step_iw_sgd(uni.grad_fn, theta, b,
                                  constant_weights(2, cfg.momentum_eta));
    const bool bitwise = sdrg.delta == iw.delta;
    sb.below("sdrg/collapse_to_iw",
             bitwise ? 0.0 : (sdrg.delta - iw.delta).norm(), 1e-300,
             {OptKind::Sdrg, OptKind::IwSgd},
             "gamma=0, fresh snapshots: bitwise collapse to eta*IW-SGD");
  }
  {
    // frozen snapshots, size-2 batch enumeration vs the analytic
    // composition-weighted combination of per-class full gradients
    OptimizerConfig cfg;
    cfg.alpha = 0.7;
    cfg.beta = 1.3;
    cfg.momentum_eta = 0.1;
    cfg.momentum_gamma = 0.9;
    cfg.snapshot_period = 1000;
    const ClassWeights w = exact_weights(skew);
    auto est = [&](const std::vector<int>& b) {
      ControlVariateState state = init_sdrg_state(2, theta_snap);
      return step_sdrg(skew.grad_fn, theta, batch_of(skew, b), w, state, cfg,
                       1)
          .delta;
    };
    // analytic expectation by conditioning on the batch class composition
    const auto by_class = skew.per_class();
    std::vector<Vector> term(2);
    for (int c = 0; c < 2; ++c) {
      const Vector g_now = mean_grad(skew.grad_fn, by_class[c], theta);
      const Vector g_snap = mean_grad(skew.grad_fn, by_class[c], theta_snap);
      term[c] = cfg.alpha * w.at(c) * g_now -
                cfg.beta * (w.at(c) * g_snap - cfg.momentum_eta * g_now);
    }
    const double q0 = skew.q.probs[0], q1 = skew.q.probs[1];
    Vector analytic = q0 * q0 * term[0] + q1 * q1 * term[1] +
                      2.0 * q0 * q1 * 0.5 * (term[0] + term[1]);
    EstimatorReport rep = enumerate_mean(skew, est, analytic, 2);
    sb.below("sdrg/frozen_expectation", rep.bias_norm, 1e-10, {OptKind::Sdrg},
             "size-2 batch enumeration matches analytic combination");
  }

  // --- completeness ----------------------------------------------------------
  {
    std::string missing;
    for (const auto& [kind, done] : sb.exercised)
      if (!done) missing += to_string(kind) + " ";
    sb.report.checks.push_back({"suite/completeness", missing.empty(),
                                static_cast<double>(missing.size()), 0.0,
                                missing.empty()
                                    ? "every optimizer kind exercised"
                                    : "missing: " + missing});
  }
  return sb.report;
}

void print_report(const VerifyReport& report, std::ostream& out) {
  out << std::left;
  for (const VerifyCheck& c : report.checks) {
    out << (c.pass ? "PASS  " : "FAIL  ") << std::setw(30) << c.name
        << std::scientific << std::setprecision(3) << " value=" << c.value
        << " bound=" << c.threshold << "  " << c.detail << "\n";
  }
  out << (report.all_pass() ? "all checks passed" : "SOME CHECKS FAILED")
      << "\n";
}

}  // namespace drgrad
