#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace cgas {

struct AcceptanceOptions {
  std::string suite = "full"; // "fast" skips the sampling-heavy criteria 6-8
  int threads = 1;
  nlohmann::json tolerances = nlohmann::json::object(); // overrides by name
  std::vector<int> only;                                 // empty: all in the suite
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  double limit = 0.0; // runtime budget in seconds
  std::vector<std::string> details;
};

// Runs the acceptance criteria, printing one PASS/FAIL line per criterion as
// it finishes and a table at the end. Unknown tolerance names raise SpecError.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, std::ostream& out);

bool all_passed(const std::vector<CriterionResult>& results);

// Names and default values of the adjustable tolerances.
nlohmann::json default_tolerances();

} // namespace cgas
