#include "drgrad/sampling.hpp"

#include <cmath>

namespace drgrad {

void ClassDist::validate() const {
  if (probs.size() < 2) throw ConfigError("ClassDist needs >= 2 classes");
  if ((probs.array() < 0.0).any())
    throw ConfigError("ClassDist has negative probability");
  if (std::abs(probs.sum() - 1.0) > 1e-12)
    throw ConfigError("ClassDist does not sum to 1");
}

ClassDist ClassDist::uniform(int num_classes) {
  ClassDist d;
  d.probs = Vector::Constant(num_classes, 1.0 / num_classes);
  return d;
}

std::string to_string(SkewKind kind) {
  switch (kind) {
    case SkewKind::Uniform: return "uniform";
    case SkewKind::FixedSkew: return "fixed_skew";
    case SkewKind::RotatingSkew: return "rotating_skew";
  }
  return "?";
}

SkewKind skew_kind_from_string(const std::string& s) {
  if (s == "uniform") return SkewKind::Uniform;
  if (s == "fixed_skew" || s == "fixed") return SkewKind::FixedSkew;
  if (s == "rotating_skew" || s == "rotating") return SkewKind::RotatingSkew;
  throw ConfigError("unknown skew kind: " + s);
}

void SkewSchedule::validate(int num_classes) const {
  if (kind == SkewKind::Uniform) return;
  if (skew_prob < 1.0 / num_classes || skew_prob > 1.0)
    throw ConfigError("skew_prob must be in [1/C, 1]");
  if (kind == SkewKind::FixedSkew &&
      (skewed_class < 0 || skewed_class >= num_classes))
    throw ConfigError("skewed_class out of range");
  if (kind == SkewKind::RotatingSkew && rotation_period < 1)
    throw ConfigError("rotation_period must be >= 1");
}

ClassDist q_at(const SkewSchedule& schedule, long t, int num_classes) {
  if (t < 0) throw PreconditionError("q_at: t must be >= 0");
  schedule.validate(num_classes);
  if (schedule.kind == SkewKind::Uniform)
    return ClassDist::uniform(num_classes);
  const int hot = schedule.kind == SkewKind::FixedSkew
                      ? schedule.skewed_class
                      : static_cast<int>((t / schedule.rotation_period) %
                                         num_classes);
  ClassDist d;
  d.probs = Vector::Constant(num_classes,
                             (1.0 - schedule.skew_prob) / (num_classes - 1));
  d.probs[hot] = schedule.skew_prob;
  return d;
}

MiniBatch draw_batch(const Dataset& dataset, const SkewSchedule& schedule,
                     long t, int batch_size, Rng& rng) {
  const int c_total = dataset.num_classes;
  for (int c = 0; c < c_total; ++c)
    if (dataset.per_class_index[c].empty())
      throw DataError("dataset has no examples of class " + std::to_string(c));
  const ClassDist q = q_at(schedule, t, c_total);

  MiniBatch batch;
  batch.iteration = t;
  batch.by_class.assign(c_total, {});
  for (int s = 0; s < batch_size; ++s) {
    // inverse-CDF over classes in ascending index order
    const double u = rng.uniform();
    int c = c_total - 1;
    double acc = 0.0;
    for (int k = 0; k < c_total; ++k) {
      acc += q.probs[k];
      if (u < acc) { c = k; break; }
    }
    const auto& pool = dataset.per_class_index[c];
    const int i = pool[rng.index(pool.size())];
    batch.indices.push_back(i);
    batch.by_class[c].push_back(i);
  }
  return batch;
}

MiniBatch draw_batch(const Dataset& dataset, const SkewSchedule& schedule,
                     long t, int batch_size, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return draw_batch(dataset, schedule, t, batch_size, rng);
}

std::string to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::Unit: return "unit";
    case WeightMode::Exact: return "exact";
    case WeightMode::Empirical: return "empirical";
    case WeightMode::Misspecified: return "misspecified";
  }
  return "?";
}

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "unit") return WeightMode::Unit;
  if (s == "exact") return WeightMode::Exact;
  if (s == "empirical") return WeightMode::Empirical;
  if (s == "misspecified") return WeightMode::Misspecified;
  throw ConfigError("unknown weight mode: " + s);
}

double ClassWeights::at(int c) const {
  if (!w[c])
    throw StateError("weight requested for absent class " + std::to_string(c));
  return *w[c];
}

ClassWeights weights_for(const MiniBatch& batch, const WeightModel& wm,
                         const ClassDist& target, const SkewSchedule& schedule,
                         long t) {
  if (batch.indices.empty())
    throw EmptyInputError("weights_for: empty batch");
  const int c_total = target.num_classes();
  ClassWeights out;
  out.w.assign(c_total, std::nullopt);

  switch (wm.mode) {
    case WeightMode::Unit:
      for (int c = 0; c < c_total; ++c) out.w[c] = 1.0;
      break;
    case WeightMode::Exact:
    case WeightMode::Misspecified: {
      const ClassDist q = q_at(schedule, t, c_total);
      for (int c = 0; c < c_total; ++c) {
        double w = target.probs[c] / q.probs[c];
        if (wm.mode == WeightMode::Misspecified) {
          // deterministic per-class factor in [0.5, 2.0]
          const std::uint64_t h =
              hash_mix(wm.perturbation_seed ^ (0x9e3779b97f4a7c15ULL * (c + 1)));
          w *= 0.5 + 1.5 * ((h >> 11) * 0x1.0p-53);
        }
        out.w[c] = w;
      }
      break;
    }
    case WeightMode::Empirical: {
      const double total = batch.size();
      for (int c = 0; c < c_total; ++c) {
        const int cnt = batch.class_count(c);
        if (cnt > 0) out.w[c] = target.probs[c] / (cnt / total);
      }
      break;
    }
  }
  return out;
}

}  // namespace drgrad
