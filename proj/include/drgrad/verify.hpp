#ifndef DRGRAD_VERIFY_HPP
#define DRGRAD_VERIFY_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "drgrad/oracle.hpp"

namespace drgrad {

struct VerifyCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;      // measured bias / error / difference
  double threshold = 0.0;  // bound it was checked against
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const;
  const VerifyCheck& find(const std::string& name) const;
};

// Machine checks of the estimator claims: gradient correctness,
// unbiasedness, double robustness, SAG bias, variance ordering, momentum
// equivalence, SDRG collapse, and a completeness check that every
// optimizer kind was exercised.
VerifyReport run_verification_suite();

void print_report(const VerifyReport& report, std::ostream& out);

// Shared fixtures.
// Quadratic fixture: n = 6, C = 2, dim = 3, distinct per-class centers.
ToyProblem quadratic_fixture(const ClassDist& q);
ClassDist skew_dist(int num_classes, int hot, double prob);

}  // namespace drgrad

#endif  // DRGRAD_VERIFY_HPP
