#ifndef DRGRAD_ORACLE_HPP
#define DRGRAD_ORACLE_HPP

#include <functional>
#include <vector>

#include "drgrad/data_io.hpp"
#include "drgrad/optim.hpp"
#include "drgrad/sampling.hpp"

namespace drgrad {

// Small fixture whose sample space can be enumerated exactly. Examples are
// drawn class-first from q, then uniformly within the class.
struct ToyProblem {
  GradFn grad_fn;
  std::vector<int> labels;
  int num_classes = 0;
  ClassDist q;
  ClassDist p;
  Eigen::Index dim = 0;

  int n() const { return static_cast<int>(labels.size()); }
  std::vector<std::vector<int>> per_class() const;
  // Probability of drawing example i in one slot: q_c / n_c.
  double draw_prob(int i) const;
  // p-weighted full gradient: sum_c p_c * class-mean gradient.
  Vector balanced_gradient(const Vector& theta) const;
};

// f_i(theta) = 0.5 * ||theta - a_i||^2 with stored centers a_i.
ToyProblem make_quadratic_problem(const std::vector<Vector>& centers,
                                  const std::vector<int>& labels,
                                  const ClassDist& q, const ClassDist& p);

ToyProblem make_softmax_problem(const Dataset& ds, const ModelSpec& spec,
                                const ClassDist& q, const ClassDist& p);

struct EstimatorReport {
  Vector exact_mean;
  double exact_variance_trace = 0.0;
  Vector reference_gradient;
  double bias_norm = 0.0;
};

// delta produced from one enumerated batch of dataset indices.
using BatchEstimator = std::function<Vector(const std::vector<int>& batch)>;

constexpr std::size_t kEnumerationCap = 10000;

// Walks every ordered batch of the given size, weighting each by its exact
// probability under q; mean, variance trace, and bias vs the reference.
EstimatorReport enumerate_mean(const ToyProblem& problem,
                               const BatchEstimator& estimator,
                               const Vector& reference, int batch_size = 1);

enum class DrScenario { WeightsOkCvBad, WeightsBadCvOk, BothBad };

// Single-draw doubly robust estimator with the scenario's misspecification.
// The expectation term is the exact p-expectation of the control variates.
EstimatorReport check_double_robustness(const ToyProblem& problem,
                                        DrScenario scenario,
                                        const Vector& theta,
                                        std::uint64_t seed = 7);

struct VarianceComparison {
  EstimatorReport a;
  EstimatorReport b;
  double trace_difference = 0.0;  // a minus b
};

// Requires both estimators unbiased on the problem (within bias_tol).
VarianceComparison compare_variance(const ToyProblem& problem,
                                    const BatchEstimator& estimator_a,
                                    const BatchEstimator& estimator_b,
                                    const Vector& reference,
                                    int batch_size = 1,
                                    double bias_tol = 1e-9);

// Exact mean of the SAG delta against the full gradient, given a table of
// stored per-example gradients.
EstimatorReport check_sag_bias(const ToyProblem& problem,
                               const std::vector<Vector>& stale_table,
                               const Vector& theta);

}  // namespace drgrad

#endif  // DRGRAD_ORACLE_HPP
