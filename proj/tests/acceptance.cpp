// Acceptance suite runner: one pass/fail line per criterion.
#include <cstdlib>
#include <iostream>

#include "localscore/selftest.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 0;
  if (const char* s = std::getenv("LOCALSCORE_SEED")) seed = std::strtoull(s, nullptr, 10);
  if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);

  auto summary = localscore::selftest::run(seed);
  for (const auto& c : summary.criteria) {
    std::cout << (c.passed ? "PASS" : "FAIL") << "  " << c.id << "  " << c.title;
    if (!c.detail.empty()) std::cout << "  [" << c.detail << "]";
    std::cout << "\n";
  }
  std::cout << (summary.all_passed ? "ACCEPTANCE: all criteria passed"
                                   : "ACCEPTANCE: FAILURES PRESENT")
            << " (seed " << summary.seed << ")\n";
  return summary.all_passed ? 0 : 1;
}
