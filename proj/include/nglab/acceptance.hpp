#pragma once

#include "nglab/io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nglab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  Json measured;        // criterion-specific numbers
  std::string summary;  // one line
  double seconds = 0.0;
  bool smoke = false;
};

struct AcceptOptions {
  bool quick = false;  // reduced sample counts; results are marked smoke
  std::uint64_t seed = 1;
  bool parallel = true;
};

inline constexpr int kNumCriteria = 11;

/// Runs one criterion (1..11). Exceptions inside a criterion become a failure.
CriterionResult run_criterion(int id, const AcceptOptions& opts);
/// Runs the listed criteria (all when empty) in order.
std::vector<CriterionResult> run_acceptance(const AcceptOptions& opts,
                                            const std::vector<int>& ids = {});

/// "C<id> PASS|FAIL [smoke] <name>: <summary> (<s> s)"
std::string format_line(const CriterionResult& r);
Json to_json(const CriterionResult& r);

}  // namespace nglab
