#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace localscore::selftest {

struct CriterionResult {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
};

struct Summary {
  std::uint64_t seed = 0;
  std::vector<CriterionResult> criteria;
  bool all_passed = false;
};

// Runs the full acceptance suite (generation identities, operator identities,
// parity, gauge invariance, divergence values, concavity verdicts,
// estimators, chart transport) with every tolerance pinned in code.
// Deterministic for a fixed seed.
Summary run(std::uint64_t seed);

}  // namespace localscore::selftest
