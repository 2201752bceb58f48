#include <doctest.h>

#include <cmath>

#include "drgrad/sampling.hpp"

using namespace drgrad;

namespace {

SkewSchedule fixed08() {
  SkewSchedule s;
  s.kind = SkewKind::FixedSkew;
  s.skew_prob = 0.8;
  s.skewed_class = 0;
  return s;
}

SkewSchedule rotating(int period) {
  SkewSchedule s;
  s.kind = SkewKind::RotatingSkew;
  s.skew_prob = 0.8;
  s.rotation_period = period;
  return s;
}

}  // namespace

TEST_CASE("q_at shapes") {
  ClassDist u = q_at(SkewSchedule{}, 0, 10);
  for (int c = 0; c < 10; ++c) CHECK(u.probs[c] == doctest::Approx(0.1));

  ClassDist f = q_at(fixed08(), 3, 10);
  CHECK(f.probs[0] == doctest::Approx(0.8));
  for (int c = 1; c < 10; ++c)
    CHECK(f.probs[c] == doctest::Approx(0.2 / 9.0));

  CHECK(q_at(rotating(50), 0, 10).probs[0] == doctest::Approx(0.8));
  CHECK(q_at(rotating(50), 50, 10).probs[1] == doctest::Approx(0.8));
  CHECK(q_at(rotating(50), 49, 10).probs[0] == doctest::Approx(0.8));
}

TEST_CASE("q_at is a distribution for all schedules and times") {
  for (const SkewSchedule& s : {SkewSchedule{}, fixed08(), rotating(7)}) {
    for (long t : {0L, 1L, 6L, 7L, 35L, 1000L}) {
      ClassDist q = q_at(s, t, 10);
      CHECK((q.probs.array() >= 0.0).all());
      CHECK(std::abs(q.probs.sum() - 1.0) < 1e-12);
    }
  }
  CHECK_THROWS_AS(q_at(SkewSchedule{}, -1, 10), PreconditionError);
}

TEST_CASE("rotating skew is periodic with period R*C") {
  const SkewSchedule s = rotating(7);
  for (long t : {0L, 3L, 13L, 40L}) {
    ClassDist a = q_at(s, t, 10);
    ClassDist b = q_at(s, t + 7L * 10L, 10);
    CHECK(a.probs == b.probs);
  }
}

TEST_CASE("draw_batch class frequencies match q") {
  Dataset ds = synth_blobs(10, 30, 4, 2.0, 1);
  {
    MiniBatch b = draw_batch(ds, SkewSchedule{}, 0, 10000, 42);
    for (int c = 0; c < 10; ++c)
      CHECK(std::abs(b.class_count(c) / 10000.0 - 0.1) < 0.01);
  }
  {
    MiniBatch b = draw_batch(ds, fixed08(), 0, 10000, 42);
    CHECK(std::abs(b.class_count(0) / 10000.0 - 0.8) < 0.02);
  }
}

TEST_CASE("draw_batch basics") {
  Dataset ds = synth_blobs(4, 5, 3, 2.0, 2);
  MiniBatch one = draw_batch(ds, SkewSchedule{}, 0, 1, 7);
  int nonempty = 0;
  for (int c = 0; c < 4; ++c) nonempty += one.by_class[c].empty() ? 0 : 1;
  CHECK(nonempty == 1);
  CHECK(one.size() == 1);

  MiniBatch a = draw_batch(ds, fixed08(), 5, 20, 123);
  MiniBatch b = draw_batch(ds, fixed08(), 5, 20, 123);
  CHECK(a.indices == b.indices);

  // partition property
  int total = 0;
  for (int c = 0; c < 4; ++c) {
    total += a.class_count(c);
    for (int i : a.by_class[c]) CHECK(ds.examples[i].label == c);
  }
  CHECK(total == a.size());
}

TEST_CASE("weights_for exact mode") {
  Dataset ds = synth_blobs(10, 3, 2, 2.0, 3);
  MiniBatch b = draw_batch(ds, fixed08(), 0, 20, 1);
  ClassDist p = ClassDist::uniform(10);

  ClassWeights unit = weights_for(b, {WeightMode::Unit, 0}, p, fixed08(), 0);
  for (int c = 0; c < 10; ++c) CHECK(unit.at(c) == 1.0);

  ClassWeights w = weights_for(b, {WeightMode::Exact, 0}, p, fixed08(), 0);
  CHECK(w.at(0) == doctest::Approx(0.125));
  for (int c = 1; c < 10; ++c) CHECK(w.at(c) == doctest::Approx(4.5));

  // matched p and q
  ClassWeights m =
      weights_for(b, {WeightMode::Exact, 0}, p, SkewSchedule{}, 0);
  for (int c = 0; c < 10; ++c) CHECK(m.at(c) == doctest::Approx(1.0));

  // exact-mode identity: sum_c q_c * w_c = 1
  ClassDist q = q_at(fixed08(), 0, 10);
  double s = 0.0;
  for (int c = 0; c < 10; ++c) s += q.probs[c] * w.at(c);
  CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("weights_for empirical mode") {
  MiniBatch b;
  b.by_class.assign(10, {});
  for (int k = 0; k < 16; ++k) {
    b.indices.push_back(k);
    b.by_class[0].push_back(k);
  }
  for (int k = 16; k < 20; ++k) {
    b.indices.push_back(k);
    b.by_class[4].push_back(k);
  }
  ClassDist p = ClassDist::uniform(10);
  ClassWeights w = weights_for(b, {WeightMode::Empirical, 0}, p, fixed08(), 0);
  CHECK(w.at(0) == doctest::Approx(0.1 / 0.8));
  CHECK(w.at(4) == doctest::Approx(0.1 / 0.2));
  CHECK_FALSE(w.present(1));
  CHECK_THROWS_AS(w.at(1), StateError);
}

TEST_CASE("weights_for misspecified mode is a bounded deterministic tilt") {
  Dataset ds = synth_blobs(10, 3, 2, 2.0, 4);
  MiniBatch b = draw_batch(ds, fixed08(), 0, 20, 2);
  ClassDist p = ClassDist::uniform(10);
  ClassWeights exact = weights_for(b, {WeightMode::Exact, 0}, p, fixed08(), 0);
  ClassWeights m1 =
      weights_for(b, {WeightMode::Misspecified, 5}, p, fixed08(), 0);
  ClassWeights m2 =
      weights_for(b, {WeightMode::Misspecified, 5}, p, fixed08(), 0);
  bool any_off = false;
  for (int c = 0; c < 10; ++c) {
    const double ratio = m1.at(c) / exact.at(c);
    CHECK(ratio >= 0.5);
    CHECK(ratio <= 2.0);
    CHECK(m1.at(c) == m2.at(c));
    any_off |= std::abs(ratio - 1.0) > 1e-3;
  }
  CHECK(any_off);
}

TEST_CASE("empty batch is rejected") {
  MiniBatch b;
  b.by_class.assign(10, {});
  CHECK_THROWS_AS(
      weights_for(b, {WeightMode::Unit, 0}, ClassDist::uniform(10),
                  SkewSchedule{}, 0),
      EmptyInputError);
}
