#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace prnet::acceptance {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

struct Check {
  int id;
  std::string name;
  std::function<CheckResult()> run;
};

/// The ten acceptance checks, in order.
std::vector<Check> checks();

/// Runs the selected checks (all when `only` is empty), printing one
/// "PASS"/"FAIL" line per check to `out`. Exceptions count as failures.
std::vector<CheckResult> run(const std::vector<int>& only, std::ostream& out);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace prnet::acceptance
