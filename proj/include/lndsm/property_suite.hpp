#pragma once

#include "lndsm/autodiff.hpp"
#include "lndsm/rng.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace lndsm {

struct PropertyOutcome {
  bool passed = false;
  std::string detail;
};

/// One invariant of one module, runnable on its own.
struct PropertyCheck {
  std::string module;
  std::string name;
  std::function<PropertyOutcome()> run;
};

/// Every registered check, grouped by module in a fixed order.
const std::vector<PropertyCheck>& property_checks();

/// Number of invariants each module documents; the coverage check compares against it.
const std::vector<std::pair<std::string, int>>& documented_invariants();

struct PropertyResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteReport {
  std::vector<PropertyResult> results;
  bool stopped_early = false;

  bool passed() const;
  /// {"passed", "stopped_early", "results": [...], "coverage": {module: [names]}}
  std::string to_json() const;
};

/// Runs the checks of `module` (all modules when empty) in registry order.
SuiteReport run_property_suite(const std::string& module = "", bool stop_on_failure = true);

// ---------------------------------------------------------------------------
// Gradient checking shared with the tests.

using TapeFunction = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Central differences against the tape gradient. `coords_per_input` <= 0
/// checks every entry; otherwise that many entries per input, drawn from rng.
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradientCheck check_gradient(const TapeFunction& f, const std::vector<Eigen::MatrixXd>& inputs, double eps = 1e-5,
                             int coords_per_input = 0, Rng* rng = nullptr, double floor = 1e-4);

}  // namespace lndsm
