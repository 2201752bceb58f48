#include "drgrad/model.hpp"

#include <cmath>
#include <limits>

#include "drgrad/rng.hpp"

namespace drgrad {
namespace {

using ConstMatMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;

struct LinearViews {
  ConstMatMap w;
  ConstVecMap b;
};

struct MlpViews {
  ConstMatMap w1;
  ConstVecMap b1;
  ConstMatMap w2;
  ConstVecMap b2;
};

LinearViews linear_views(const ModelSpec& spec, const Vector& theta) {
  const auto c = spec.num_classes, d = spec.input_dim;
  return {ConstMatMap(theta.data(), c, d),
          ConstVecMap(theta.data() + static_cast<Eigen::Index>(c) * d, c)};
}

MlpViews mlp_views(const ModelSpec& spec, const Vector& theta) {
  const Eigen::Index d = spec.input_dim, h = spec.hidden_dim,
                     c = spec.num_classes;
  const double* p = theta.data();
  return {ConstMatMap(p, h, d), ConstVecMap(p + h * d, h),
          ConstMatMap(p + h * d + h, c, h),
          ConstVecMap(p + h * d + h + c * h, c)};
}

void check_example(const ModelSpec& spec, const Vector& theta,
                   const Example& ex) {
  spec.validate();
  if (ex.features.size() != spec.input_dim)
    throw DimensionError("example feature dim " +
                         std::to_string(ex.features.size()) +
                         " != model input_dim " +
                         std::to_string(spec.input_dim));
  if (ex.label < 0 || ex.label >= spec.num_classes)
    throw DataError("label " + std::to_string(ex.label) + " out of range");
  if (theta.size() != layout_of(spec).total)
    throw DimensionError("theta size " + std::to_string(theta.size()) +
                         " != layout total");
}

Vector logits_of(const ModelSpec& spec, const Vector& theta,
                 const Vector& x) {
  if (spec.kind == ModelKind::SoftmaxLinear) {
    auto v = linear_views(spec, theta);
    return v.w * x + v.b;
  }
  auto v = mlp_views(spec, theta);
  Vector hidden = (v.w1 * x + v.b1).cwiseMax(0.0);
  return v.w2 * hidden + v.b2;
}

// softmax probabilities and the log-sum-exp loss for one label
double softmax_loss(const Vector& logits, int label, Vector* probs) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  const double z = e.sum();
  if (probs) *probs = e / z;
  const double value = std::log(z) + m - logits[label];
  if (!std::isfinite(value))
    throw NumericError("non-finite loss value", -1);
  return value;
}

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::SoftmaxLinear ? "softmax_linear" : "mlp_1hidden";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "softmax_linear") return ModelKind::SoftmaxLinear;
  if (s == "mlp_1hidden") return ModelKind::Mlp1Hidden;
  throw ConfigError("unknown model kind: " + s);
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("model input_dim must be >= 1");
  if (num_classes < 2) throw ConfigError("model num_classes must be >= 2");
  if (kind == ModelKind::Mlp1Hidden && hidden_dim < 1)
    throw ConfigError("mlp_1hidden requires hidden_dim >= 1");
}

ParamLayout layout_of(const ModelSpec& spec) {
  ParamLayout l;
  auto add = [&l](const std::string& name, Eigen::Index rows,
                  Eigen::Index cols) {
    l.blocks.push_back({name, l.total, rows, cols});
    l.total += rows * cols;
  };
  const Eigen::Index d = spec.input_dim, h = spec.hidden_dim,
                     c = spec.num_classes;
  if (spec.kind == ModelKind::SoftmaxLinear) {
    add("w", c, d);
    add("b", c, 1);
  } else {
    add("w1", h, d);
    add("b1", h, 1);
    add("w2", c, h);
    add("b2", c, 1);
  }
  return l;
}

double loss(const ModelSpec& spec, const Vector& theta, const Example& ex) {
  check_example(spec, theta, ex);
  return softmax_loss(logits_of(spec, theta, ex.features), ex.label, nullptr);
}

Vector grad(const ModelSpec& spec, const Vector& theta, const Example& ex) {
  check_example(spec, theta, ex);
  const Vector& x = ex.features;
  Vector g = Vector::Zero(theta.size());
  if (spec.kind == ModelKind::SoftmaxLinear) {
    auto v = linear_views(spec, theta);
    Vector logits = v.w * x + v.b;
    Vector probs;
    softmax_loss(logits, ex.label, &probs);
    probs[ex.label] -= 1.0;  // dL/dlogits
    const Eigen::Index c = spec.num_classes, d = spec.input_dim;
    Eigen::Map<Matrix>(g.data(), c, d).noalias() = probs * x.transpose();
    Eigen::Map<Vector>(g.data() + c * d, c) = probs;
  } else {
    auto v = mlp_views(spec, theta);
    Vector pre = v.w1 * x + v.b1;
    Vector hidden = pre.cwiseMax(0.0);
    Vector logits = v.w2 * hidden + v.b2;
    Vector probs;
    softmax_loss(logits, ex.label, &probs);
    probs[ex.label] -= 1.0;
    const Eigen::Index d = spec.input_dim, h = spec.hidden_dim,
                       c = spec.num_classes;
    Vector dpre =
        (v.w2.transpose() * probs).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    double* p = g.data();
    Eigen::Map<Matrix>(p, h, d).noalias() = dpre * x.transpose();
    Eigen::Map<Vector>(p + h * d, h) = dpre;
    Eigen::Map<Matrix>(p + h * d + h, c, h).noalias() = probs * hidden.transpose();
    Eigen::Map<Vector>(p + h * d + h + c * h, c) = probs;
  }
  if (!all_finite(g)) throw NumericError("non-finite gradient", -1);
  return g;
}

Vector grad_batch(const ModelSpec& spec, const Vector& theta,
                  const std::vector<Example>& exs) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(exs.size());
  for (const Example& e : exs) ptrs.push_back(&e);
  return grad_batch(spec, theta, ptrs);
}

Vector grad_batch(const ModelSpec& spec, const Vector& theta,
                  const std::vector<const Example*>& exs) {
  if (exs.empty()) throw EmptyInputError("grad_batch: empty batch");
  // Same accumulation order as reduce_mean so the two agree bitwise.
  Vector sum = Vector::Zero(theta.size());
  for (const Example* e : exs) sum += grad(spec, theta, *e);
  return sum / static_cast<double>(exs.size());
}

double fd_check(const ModelSpec& spec, const Vector& theta, const Example& ex,
                double h) {
  if (h <= 0.0) throw PreconditionError("fd_check: h must be > 0");
  Vector analytic = grad(spec, theta, ex);
  Vector probe = theta;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = loss(spec, probe, ex);
    probe[k] = orig - h;
    const double down = loss(spec, probe, ex);
    probe[k] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double denom =
        std::max({1.0, std::abs(analytic[k]), std::abs(fd)});
    worst = std::max(worst, std::abs(analytic[k] - fd) / denom);
  }
  return worst;
}

double min_abs_hidden_preactivation(const ModelSpec& spec, const Vector& theta,
                                    const Example& ex) {
  if (spec.kind != ModelKind::Mlp1Hidden)
    return std::numeric_limits<double>::infinity();
  check_example(spec, theta, ex);
  auto v = mlp_views(spec, theta);
  return (v.w1 * ex.features + v.b1).cwiseAbs().minCoeff();
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamLayout l = layout_of(spec);
  Rng rng(seed);
  ParamVector p;
  p.theta = Vector::Zero(l.total);
  for (const auto& blk : l.blocks) {
    if (blk.cols == 1) continue;  // biases stay zero
    const double bound = 1.0 / std::sqrt(static_cast<double>(blk.cols));
    for (Eigen::Index i = 0; i < blk.rows * blk.cols; ++i)
      p.theta[blk.offset + i] = rng.uniform(-bound, bound);
  }
  return p;
}

EvalResult evaluate(const ModelSpec& spec, const Vector& theta,
                    const std::vector<const Example*>& exs) {
  if (exs.empty()) throw EmptyInputError("evaluate: empty example set");
  const Eigen::Index n = static_cast<Eigen::Index>(exs.size());
  Matrix x(spec.input_dim, n);
  for (Eigen::Index j = 0; j < n; ++j) x.col(j) = exs[j]->features;

  Matrix logits;
  if (spec.kind == ModelKind::SoftmaxLinear) {
    auto v = linear_views(spec, theta);
    logits = (v.w * x).colwise() + v.b;
  } else {
    auto v = mlp_views(spec, theta);
    Matrix hidden = ((v.w1 * x).colwise() + v.b1).cwiseMax(0.0);
    logits = (v.w2 * hidden).colwise() + v.b2;
  }

  double loss_sum = 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index argmax;
    const double m = logits.col(j).maxCoeff(&argmax);
    const double z = (logits.col(j).array() - m).exp().sum();
    loss_sum += std::log(z) + m - logits(exs[j]->label, j);
    if (argmax == exs[j]->label) ++correct;
  }
  return {loss_sum / static_cast<double>(n),
          static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace drgrad
