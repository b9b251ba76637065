#include "experiments.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Arguments, if any, select criteria by number (e.g. `acceptance 1 2 7`).
int main(int argc, char** argv) {
  using namespace creditquote::experiments;
  const std::vector<std::function<Verdict()>> all = {
      likelihood_derivatives, pricing_against_brute_force, estimation_rate,
      figure_grid_ordering,   decay_rate_effect,           quadratic_regret,
      determinism_and_lookahead, replay_round_trip,        diagnostics_checks};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = all[i]();
    } catch (const std::exception& e) {
      v = Verdict{id, "criterion " + std::to_string(id), false, std::string("error: ") + e.what(), 0.0};
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << v.id << ": " << v.name << " -- " << v.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
