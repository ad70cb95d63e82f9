#include "lndsm/property_suite.hpp"

#include <doctest.h>
#include <json.hpp>

#include <iostream>
#include <set>

using namespace lndsm;

TEST_CASE("every module meets its documented invariant count") {
  std::map<std::string, int> registered;
  std::set<std::string> names;
  for (const auto& c : property_checks()) {
    ++registered[c.module];
    CHECK(names.insert(c.module + "/" + c.name).second);
  }
  CHECK(documented_invariants().size() == 8);
  for (const auto& [module, count] : documented_invariants()) CHECK(registered[module] >= count);
}

TEST_CASE("the full suite passes") {
  const SuiteReport r = run_property_suite("", false);
  for (const auto& p : r.results)
    if (!p.passed) std::cerr << p.module << "/" << p.name << ": " << p.detail << "\n";
  CHECK(r.passed());
  CHECK_FALSE(r.stopped_early);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("passed") == true);
  CHECK(j.at("results").size() == property_checks().size());
  CHECK(j.at("coverage").size() == 8);
}

TEST_CASE("gradient checker catches a wrong gradient") {
  const TapeFunction square = [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(v[0] * v[0]); };
  Rng rng(1);
  const Eigen::MatrixXd x = rng.normal_matrix(3, 2);
  CHECK(check_gradient(square, {x}).max_rel_error < 1e-7);
  const TapeFunction detached = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    return ad::sum(v[0] * t.constant(v[0].value()));
  };
  CHECK(check_gradient(detached, {x}).max_rel_error > 0.1);
}
