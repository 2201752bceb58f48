#ifndef DRGRAD_MODEL_HPP
#define DRGRAD_MODEL_HPP

#include <string>
#include <vector>

#include "drgrad/tensor.hpp"

namespace drgrad {

struct Example {
  Vector features;  // normalized to [0, 1]
  int label = 0;
  int index = 0;  // stable dataset index
};

enum class ModelKind { SoftmaxLinear, Mlp1Hidden };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::SoftmaxLinear;
  int input_dim = 0;
  int hidden_dim = 0;  // Mlp1Hidden only
  int num_classes = 0;

  void validate() const;
};

// Offsets of each weight/bias block inside the flat parameter vector.
// Weight matrices are stored column-major.
struct ParamLayout {
  struct Block {
    std::string name;
    Eigen::Index offset;
    Eigen::Index rows;
    Eigen::Index cols;  // 1 for bias blocks
  };
  std::vector<Block> blocks;
  Eigen::Index total = 0;
};

ParamLayout layout_of(const ModelSpec& spec);

struct ParamVector {
  Vector theta;
};

// Cross-entropy loss of one example, softmax with max-subtraction.
double loss(const ModelSpec& spec, const Vector& theta, const Example& ex);

// Analytic gradient of loss w.r.t. theta, same layout as theta.
Vector grad(const ModelSpec& spec, const Vector& theta, const Example& ex);

// Mean of per-example gradients in index order. Bitwise identical to
// reduce_mean over the individual grads.
Vector grad_batch(const ModelSpec& spec, const Vector& theta,
                  const std::vector<Example>& exs);
Vector grad_batch(const ModelSpec& spec, const Vector& theta,
                  const std::vector<const Example*>& exs);

// Max over coordinates of the relative difference between the analytic
// gradient and a central finite difference with step h.
double fd_check(const ModelSpec& spec, const Vector& theta, const Example& ex,
                double h);

// Smallest |pre-activation| of the hidden layer; +inf for linear models.
// fd_check samples this close to a ReLU kink should be redrawn.
double min_abs_hidden_preactivation(const ModelSpec& spec, const Vector& theta,
                                    const Example& ex);

// Weights uniform in +-1/sqrt(fan_in), biases exactly zero.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Batched evaluation over a fixed example set.
struct EvalResult {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const ModelSpec& spec, const Vector& theta,
                    const std::vector<const Example*>& exs);

}  // namespace drgrad

#endif  // DRGRAD_MODEL_HPP
