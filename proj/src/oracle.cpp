#include "drgrad/oracle.hpp"

#include <cmath>

#include "drgrad/rng.hpp"

namespace drgrad {

std::vector<std::vector<int>> ToyProblem::per_class() const {
  std::vector<std::vector<int>> by_class(num_classes);
  for (int i = 0; i < n(); ++i) by_class[labels[i]].push_back(i);
  return by_class;
}

double ToyProblem::draw_prob(int i) const {
  const int c = labels[i];
  int n_c = 0;
  for (int l : labels) n_c += (l == c);
  return q.probs[c] / n_c;
}

Vector ToyProblem::balanced_gradient(const Vector& theta) const {
  Vector out = Vector::Zero(dim);
  const auto by_class = per_class();
  for (int c = 0; c < num_classes; ++c) {
    if (by_class[c].empty())
      throw DataError("toy problem has no examples of class " +
                      std::to_string(c));
    out += p.probs[c] * mean_grad(grad_fn, by_class[c], theta);
  }
  return out;
}

ToyProblem make_quadratic_problem(const std::vector<Vector>& centers,
                                  const std::vector<int>& labels,
                                  const ClassDist& q, const ClassDist& p) {
  if (centers.empty() || centers.size() != labels.size())
    throw DataError("quadratic problem: centers/labels mismatch");
  q.validate();
  p.validate();
  ToyProblem prob;
  prob.labels = labels;
  prob.num_classes = q.num_classes();
  prob.q = q;
  prob.p = p;
  prob.dim = centers[0].size();
  prob.grad_fn = [centers](int i, const Vector& theta) -> Vector {
    return theta - centers[i];
  };
  return prob;
}

ToyProblem make_softmax_problem(const Dataset& ds, const ModelSpec& spec,
                                const ClassDist& q, const ClassDist& p) {
  q.validate();
  p.validate();
  ToyProblem prob;
  prob.num_classes = ds.num_classes;
  prob.q = q;
  prob.p = p;
  prob.dim = layout_of(spec).total;
  for (const Example& e : ds.examples) prob.labels.push_back(e.label);
  prob.grad_fn = [ds, spec](int i, const Vector& theta) -> Vector {
    return grad(spec, theta, ds.examples[i]);
  };
  return prob;
}

EstimatorReport enumerate_mean(const ToyProblem& problem,
                               const BatchEstimator& estimator,
                               const Vector& reference, int batch_size) {
  const int n = problem.n();
  if (n == 0) throw EmptyInputError("enumerate_mean: empty problem");
  double outcomes = 1.0;
  for (int k = 0; k < batch_size; ++k) outcomes *= n;
  if (outcomes > static_cast<double>(kEnumerationCap))
    throw SizeError("enumeration of " + std::to_string(outcomes) +
                    " outcomes exceeds cap");

  std::vector<double> slot_prob(n);
  for (int i = 0; i < n; ++i) slot_prob[i] = problem.draw_prob(i);

  // odometer over ordered index tuples
  std::vector<int> batch(batch_size, 0);
  std::vector<Vector> deltas;
  std::vector<double> probs;
  deltas.reserve(static_cast<std::size_t>(outcomes));
  for (;;) {
    double pr = 1.0;
    for (int i : batch) pr *= slot_prob[i];
    probs.push_back(pr);
    deltas.push_back(estimator(batch));
    int k = batch_size - 1;
    while (k >= 0 && ++batch[k] == n) batch[k--] = 0;
    if (k < 0) break;
  }

  EstimatorReport rep;
  rep.reference_gradient = reference;
  rep.exact_mean = Vector::Zero(reference.size());
  for (std::size_t o = 0; o < deltas.size(); ++o)
    rep.exact_mean += probs[o] * deltas[o];
  for (std::size_t o = 0; o < deltas.size(); ++o)
    rep.exact_variance_trace +=
        probs[o] * (deltas[o] - rep.exact_mean).squaredNorm();
  rep.bias_norm = (rep.exact_mean - reference).norm();
  return rep;
}

EstimatorReport check_double_robustness(const ToyProblem& problem,
                                        DrScenario scenario,
                                        const Vector& theta,
                                        std::uint64_t seed) {
  const int n = problem.n();
  const auto by_class = problem.per_class();

  // per-class weights
  std::vector<double> w(problem.num_classes);
  for (int c = 0; c < problem.num_classes; ++c) {
    w[c] = problem.p.probs[c] / problem.q.probs[c];
    if (scenario != DrScenario::WeightsOkCvBad) {
      const std::uint64_t h = hash_mix(seed ^ (0x9e3779b97f4a7c15ULL * (c + 1)));
      w[c] *= 0.5 + 1.5 * ((h >> 11) * 0x1.0p-53);
    }
  }

  // control variates
  std::vector<Vector> cv(n);
  if (scenario == DrScenario::WeightsBadCvOk) {
    for (int i = 0; i < n; ++i) cv[i] = problem.grad_fn(i, theta);
  } else {
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
      cv[i] = Vector(problem.dim);
      for (Eigen::Index k = 0; k < problem.dim; ++k)
        cv[i][k] = rng.uniform(-1.0, 1.0);
    }
  }

  // exact p-expectation of the control variates
  Vector g_expect = Vector::Zero(problem.dim);
  for (int c = 0; c < problem.num_classes; ++c) {
    Vector class_mean = Vector::Zero(problem.dim);
    for (int i : by_class[c]) class_mean += cv[i];
    g_expect += problem.p.probs[c] * class_mean /
                static_cast<double>(by_class[c].size());
  }

  auto estimator = [&](const std::vector<int>& batch) -> Vector {
    const int i = batch[0];
    return weighted_cv_delta(w[problem.labels[i]], problem.grad_fn(i, theta),
                             cv[i], g_expect);
  };
  return enumerate_mean(problem, estimator, problem.balanced_gradient(theta),
                        1);
}

VarianceComparison compare_variance(const ToyProblem& problem,
                                    const BatchEstimator& estimator_a,
                                    const BatchEstimator& estimator_b,
                                    const Vector& reference, int batch_size,
                                    double bias_tol) {
  VarianceComparison cmp;
  cmp.a = enumerate_mean(problem, estimator_a, reference, batch_size);
  cmp.b = enumerate_mean(problem, estimator_b, reference, batch_size);
  if (cmp.a.bias_norm > bias_tol || cmp.b.bias_norm > bias_tol)
    throw PreconditionError(
        "compare_variance requires unbiased estimators (bias " +
        std::to_string(cmp.a.bias_norm) + ", " +
        std::to_string(cmp.b.bias_norm) + ")");
  cmp.trace_difference = cmp.a.exact_variance_trace - cmp.b.exact_variance_trace;
  return cmp;
}

EstimatorReport check_sag_bias(const ToyProblem& problem,
                               const std::vector<Vector>& stale_table,
                               const Vector& theta) {
  const int n = problem.n();
  if (static_cast<int>(stale_table.size()) != n)
    throw DimensionError("check_sag_bias: table size != n");
  Vector mean_table = Vector::Zero(problem.dim);
  for (const Vector& g : stale_table) mean_table += g;
  mean_table /= static_cast<double>(n);

  auto estimator = [&](const std::vector<int>& batch) -> Vector {
    const int i = batch[0];
    return (problem.grad_fn(i, theta) - stale_table[i]) /
               static_cast<double>(n) +
           mean_table;
  };
  return enumerate_mean(problem, estimator, problem.balanced_gradient(theta),
                        1);
}

}  // namespace drgrad
