#include <doctest.h>

#include "drgrad/optim.hpp"
#include "drgrad/verify.hpp"

using namespace drgrad;

namespace {

MiniBatch make_batch(const ToyProblem& prob, const std::vector<int>& idx,
                     long t = 1) {
  MiniBatch b;
  b.iteration = t;
  b.indices = idx;
  b.by_class.assign(prob.num_classes, {});
  for (int i : idx) b.by_class[prob.labels[i]].push_back(i);
  return b;
}

ClassWeights units(int c) {
  ClassWeights w;
  w.w.assign(c, 1.0);
  return w;
}

}  // namespace

TEST_CASE("step_sgd basics") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.3);
  CHECK(step_sgd(prob.grad_fn, theta, make_batch(prob, {2})).delta ==
        prob.grad_fn(2, theta));
  Vector d1 = step_sgd(prob.grad_fn, theta, make_batch(prob, {1, 4})).delta;
  Vector d2 = step_sgd(prob.grad_fn, theta, make_batch(prob, {1, 4})).delta;
  CHECK(d1 == d2);
  // duplicated batch keeps the mean
  Vector dup =
      step_sgd(prob.grad_fn, theta, make_batch(prob, {1, 4, 1, 4})).delta;
  CHECK((dup - d1).norm() < 1e-15);
}

TEST_CASE("step_iw_sgd weighting") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, -0.2);
  // one sample per class, unit weights: unweighted per-class mean
  Vector d = step_iw_sgd(prob.grad_fn, theta, make_batch(prob, {0, 3}),
                         units(2))
                 .delta;
  Vector want = 0.5 * (prob.grad_fn(0, theta) + prob.grad_fn(3, theta));
  CHECK((d - want).norm() < 1e-15);

  // single-class batch with w = 2 doubles the class mean
  ClassWeights w2;
  w2.w.assign(2, 2.0);
  Vector s = step_iw_sgd(prob.grad_fn, theta, make_batch(prob, {0, 1}), w2)
                 .delta;
  Vector mean01 = 0.5 * (prob.grad_fn(0, theta) + prob.grad_fn(1, theta));
  CHECK((s - 2.0 * mean01).norm() < 1e-15);
}

TEST_CASE("SVRG at t=0 collapses to the full gradient") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.7);
  OptimizerConfig cfg;
  cfg.snapshot_period = 50;
  ControlVariateState state = init_svrg_state();
  state.n = prob.n();
  std::vector<int> all(prob.n());
  for (int i = 0; i < prob.n(); ++i) all[i] = i;
  Vector full = mean_grad(prob.grad_fn, all, theta);
  Vector d = step_generic_cv(prob.grad_fn, theta, make_batch(prob, {2}, 0),
                             CvSchedule::Svrg, state, cfg, 0)
                 .delta;
  CHECK(d == full);
}

TEST_CASE("SAGA with a zero table is plain SGD; rows update on sampling") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.1);
  OptimizerConfig cfg;
  ControlVariateState state = init_table_state(prob.n(), 3, 16.0);
  Vector d = step_generic_cv(prob.grad_fn, theta, make_batch(prob, {4}),
                             CvSchedule::Saga, state, cfg, 1)
                 .delta;
  CHECK(d == prob.grad_fn(4, theta));
  // only row 4 was refreshed
  for (int i = 0; i < prob.n(); ++i) {
    if (i == 4)
      CHECK(state.saga_table.row(i).transpose() == prob.grad_fn(4, theta));
    else
      CHECK(state.saga_table.row(i).isZero());
  }
  CHECK((state.saga_sum - prob.grad_fn(4, theta)).norm() == 0.0);
}

TEST_CASE("SAGA expectation over single draws equals the full gradient") {
  // n = 5 quadratic, uniform draws, half-stale table
  std::vector<Vector> centers;
  std::vector<int> labels;
  for (int i = 0; i < 5; ++i) {
    centers.push_back(Vector::Constant(2, static_cast<double>(i)));
    labels.push_back(i % 2);
  }
  // per-example uniform draw: q_c proportional to class size
  ClassDist q;
  q.probs = Vector(2);
  q.probs << 3.0 / 5.0, 2.0 / 5.0;
  ToyProblem prob = make_quadratic_problem(centers, labels, q,
                                           ClassDist::uniform(2));
  Vector theta = Vector::Constant(2, 9.0);
  Vector snap = Vector::Constant(2, -1.0);
  OptimizerConfig cfg;
  ControlVariateState base = init_table_state(5, 2, 16.0);
  for (int i = 0; i < 5; ++i) {
    Vector g = prob.grad_fn(i, snap);
    base.saga_sum += g;
    base.saga_table.row(i) = g.transpose();
  }
  std::vector<int> all{0, 1, 2, 3, 4};
  Vector full = mean_grad(prob.grad_fn, all, theta);
  Vector mean = Vector::Zero(2);
  for (int i = 0; i < 5; ++i) {
    ControlVariateState state = base;
    mean += step_generic_cv(prob.grad_fn, theta, make_batch(prob, {i}),
                            CvSchedule::Saga, state, cfg, 1)
                .delta /
            5.0;
  }
  CHECK((mean - full).norm() < 1e-10);
}

TEST_CASE("uninitialized control-variate state errors out") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Zero(3);
  OptimizerConfig cfg;
  ControlVariateState empty;
  CHECK_THROWS_AS(step_generic_cv(prob.grad_fn, theta, make_batch(prob, {0}),
                                  CvSchedule::Svrg, empty, cfg, 1),
                  StateError);
  CHECK_THROWS_AS(step_generic_cv(prob.grad_fn, theta, make_batch(prob, {0}),
                                  CvSchedule::Saga, empty, cfg, 1),
                  StateError);
  CHECK_THROWS_AS(step_sdrg(prob.grad_fn, theta, make_batch(prob, {0}),
                            units(2), empty, cfg, 1),
                  StateError);
}

TEST_CASE("momentum step") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.4);
  OptimizerConfig cfg;
  cfg.momentum_eta = 0.1;
  cfg.momentum_gamma = 0.9;
  Vector zero = Vector::Zero(3);
  Vector d = step_momentum(prob.grad_fn, theta, make_batch(prob, {1}), zero,
                           cfg)
                 .delta;
  CHECK(d == Vector(0.1 * prob.grad_fn(1, theta)));

  cfg.momentum_gamma = 0.0;
  Vector prev = Vector::Constant(3, 5.0);
  Vector d0 = step_momentum(prob.grad_fn, theta, make_batch(prob, {1}), prev,
                            cfg)
                  .delta;
  CHECK(d0 == Vector(0.1 * prob.grad_fn(1, theta)));
}

TEST_CASE("apply_update") {
  Vector theta(2);
  theta << 1, 1;
  GradEstimate zero{Vector::Zero(2), {}};
  CHECK(apply_update(theta, zero, 0.5) == theta);
  GradEstimate est{Vector(2), {}};
  est.delta << 1, -1;
  CHECK(apply_update(theta, est, 0.0) == theta);
  Vector want(2);
  want << 0.5, 1.5;
  CHECK(apply_update(theta, est, 0.5) == want);

  GradEstimate bad{Vector(2), {}};
  bad.delta << std::numeric_limits<double>::infinity(), 0;
  try {
    apply_update(theta, bad, 1.0, 17);
    CHECK(false);
  } catch (const NumericError& e) {
    CHECK(e.iteration == 17);
  }
}

TEST_CASE("SDRG collapse at initialization") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.25);
  OptimizerConfig cfg;
  cfg.alpha = cfg.beta = 1.0;
  cfg.momentum_gamma = 0.0;
  cfg.momentum_eta = 0.1;
  ControlVariateState state = init_sdrg_state(2, theta);
  MiniBatch b = make_batch(prob, {0, 2, 3, 5}, 0);
  Vector d = step_sdrg(prob.grad_fn, theta, b, units(2), state, cfg, 0).delta;
  ClassWeights eta_w;
  eta_w.w.assign(2, cfg.momentum_eta);
  CHECK(d == step_iw_sgd(prob.grad_fn, theta, b, eta_w).delta);
}

TEST_CASE("SDRG leaves empty classes untouched") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.2);
  OptimizerConfig cfg;
  cfg.snapshot_period = 1000;
  ControlVariateState state = init_sdrg_state(2, Vector::Constant(3, -1.0));
  MiniBatch b = make_batch(prob, {0, 1});  // class 0 only
  step_sdrg(prob.grad_fn, theta, b, units(2), state, cfg, 1);
  CHECK(state.sdrg_momentum[0].norm() > 0.0);
  CHECK(state.sdrg_momentum[1].isZero());
  CHECK(state.sdrg_snapshots[1] == Vector::Constant(3, -1.0));
}

TEST_CASE("SDRG snapshot refresh at t mod m == 0") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta0 = Vector::Constant(3, -1.0);
  Vector theta = Vector::Constant(3, 0.6);
  OptimizerConfig cfg;
  cfg.snapshot_period = 4;
  ControlVariateState state = init_sdrg_state(2, theta0);
  step_sdrg(prob.grad_fn, theta, make_batch(prob, {0, 3}, 1), units(2), state,
            cfg, 1);
  CHECK(state.sdrg_snapshots[0] == theta0);
  step_sdrg(prob.grad_fn, theta, make_batch(prob, {0, 3}, 4), units(2), state,
            cfg, 4);
  CHECK(state.sdrg_snapshots[0] == theta);
  CHECK(state.sdrg_snapshots[1] == theta);
}

TEST_CASE("momentum accumulator ordering flag") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.5);
  OptimizerConfig cfg;
  cfg.snapshot_period = 1000;
  cfg.momentum_update_first = false;
  ControlVariateState state = init_sdrg_state(2, Vector::Constant(3, -0.5));
  MiniBatch b = make_batch(prob, {0, 1});
  Vector d =
      step_sdrg(prob.grad_fn, theta, b, units(2), state, cfg, 1).delta;
  // with post-ordering, the correction uses g^{t-1} = 0
  Vector mg = mean_grad(prob.grad_fn, b.by_class[0], theta);
  Vector mg_snap =
      mean_grad(prob.grad_fn, b.by_class[0], Vector::Constant(3, -0.5));
  CHECK((d - (mg - mg_snap)).norm() < 1e-15);
  // accumulator still advanced afterwards
  CHECK((state.sdrg_momentum[0] - 0.1 * mg).norm() < 1e-15);
}

TEST_CASE("optimizer memory cap") {
  OptimizerConfig cfg;
  cfg.kind = OptKind::Saga;
  cfg.table_cap_mb = 1.0;
  // 100k x 2k doubles would be ~1.5 GiB
  CHECK_THROWS_AS(Optimizer(cfg, 100000, 2000, 10, Vector::Zero(2000)),
                  ConfigError);
}

TEST_CASE("config validation") {
  OptimizerConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.momentum_gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.snapshot_period = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(opt_kind_from_string("adam"), ConfigError);
}

TEST_CASE("Optimizer dispatch matches the free step functions") {
  ToyProblem prob = quadratic_fixture(ClassDist::uniform(2));
  Vector theta = Vector::Constant(3, 0.9);
  MiniBatch b = make_batch(prob, {1, 5}, 0);
  for (OptKind kind : all_opt_kinds()) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    Optimizer opt(cfg, prob.n(), 3, 2, theta);
    Vector d = opt.step(prob.grad_fn, theta, b, units(2), 0).delta;
    CHECK(all_finite(d));
    CHECK(opt.effective_lr() == (kind == OptKind::Momentum ? 1.0 : cfg.lr));
  }
}
