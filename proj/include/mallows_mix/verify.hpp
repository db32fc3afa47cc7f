#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mallows_mix {

enum class VerifyLevel { fast, full };

VerifyLevel parse_verify_level(std::string_view text);

struct PropertyResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  bool lower_bound = false;  // passes when measured > tolerance (p-values) instead of below it
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  bool passed() const;
};

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::fast;
  // Multiplies the library partition function inside the moment-identity check. Values other
  // than 1 exist to confirm the suite notices a broken normalizer.
  double z_partition_scale = 1.0;
};

/// Fast: enumeration oracles up to n = 7 plus small learner checks. Full: n = 8 enumeration,
/// sampler chi-square battery and Monte-Carlo moment checks.
VerifyReport verify_suite(const VerifyOptions& options);

void print_report(std::ostream& os, const VerifyReport& report);

}  // namespace mallows_mix
