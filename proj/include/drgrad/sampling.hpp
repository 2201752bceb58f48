#ifndef DRGRAD_SAMPLING_HPP
#define DRGRAD_SAMPLING_HPP

#include <optional>
#include <string>
#include <vector>

#include "drgrad/data_io.hpp"
#include "drgrad/rng.hpp"
#include "drgrad/tensor.hpp"

namespace drgrad {

struct ClassDist {
  Vector probs;

  int num_classes() const { return static_cast<int>(probs.size()); }
  void validate() const;
  static ClassDist uniform(int num_classes);
};

enum class SkewKind { Uniform, FixedSkew, RotatingSkew };

std::string to_string(SkewKind kind);
SkewKind skew_kind_from_string(const std::string& s);

// Class-level sampling distribution per iteration. fixed_skew puts
// skew_prob on one class; rotating_skew advances the skewed class every
// rotation_period iterations.
struct SkewSchedule {
  SkewKind kind = SkewKind::Uniform;
  double skew_prob = 0.8;
  int skewed_class = 0;      // fixed_skew
  int rotation_period = 50;  // rotating_skew

  void validate(int num_classes) const;
};

ClassDist q_at(const SkewSchedule& schedule, long t, int num_classes);

struct MiniBatch {
  std::vector<int> indices;               // dataset indices I_t
  std::vector<std::vector<int>> by_class; // partition I_{t,c}
  long iteration = 0;

  int size() const { return static_cast<int>(indices.size()); }
  int class_count(int c) const { return static_cast<int>(by_class[c].size()); }
};

// Each slot: class c ~ q_at(schedule, t), then a uniform example of class c.
MiniBatch draw_batch(const Dataset& dataset, const SkewSchedule& schedule,
                     long t, int batch_size, Rng& rng);
MiniBatch draw_batch(const Dataset& dataset, const SkewSchedule& schedule,
                     long t, int batch_size, std::uint64_t rng_seed);

enum class WeightMode { Unit, Exact, Empirical, Misspecified };

std::string to_string(WeightMode mode);
WeightMode weight_mode_from_string(const std::string& s);

struct WeightModel {
  WeightMode mode = WeightMode::Unit;
  std::uint64_t perturbation_seed = 0;  // misspecified mode
};

// Per-class importance weights w_c = p_c / q_c. Empirical mode estimates
// q from the batch composition; classes absent from the batch have no
// weight (callers skip their terms). Misspecified mode applies a
// deterministic per-class factor in [0.5, 2.0] to the exact weight.
struct ClassWeights {
  std::vector<std::optional<double>> w;

  bool present(int c) const { return w[c].has_value(); }
  double at(int c) const;
};

ClassWeights weights_for(const MiniBatch& batch, const WeightModel& wm,
                         const ClassDist& target, const SkewSchedule& schedule,
                         long t);

}  // namespace drgrad

#endif  // DRGRAD_SAMPLING_HPP
