#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bellsim/core.hpp"
#include "bellsim/estimators.hpp"

namespace bellsim {

struct ExpectedCell {
  SettingPair sp;
  double e_ab = 0.0;
  double e_a = 0.0;
  double e_b = 0.0;
  double c_xy = 0.0;
};

struct ScenarioExpectation {
  Conditioning conditioning = Conditioning::postselected;
  std::vector<ExpectedCell> cells;
  double s_max_abs = 0.0;
};

struct Scenario {
  std::string name;
  ExperimentModel model;
  std::vector<ScenarioExpectation> expected;
  // Expected values are closed forms evaluated in floating point (compare to
  // 1e-12) rather than exactly representable rationals.
  bool analytic = false;
};

// Dice model: L uniform on {1..6} shared by both stations, settings {1, -1},
// a = x^L, b = y^(L+1).
Scenario lf_scenario();

// Two-valued shared lambda, P(lambda1 = lambda2) = p_same, responses +-1 that
// ignore the instrument. With flip_second_setting the second setting of each
// station reports -lambda.
Scenario lhvm_socks_scenario(double p_same, bool flip_second_setting = false);

// Post-selected correlations beat |S| <= 2 and signal, the raw ones do not.
// Throws ConstructionInvalid if enumeration no longer confirms this.
Scenario m2_demo_scenario();

// Correlated, non-product instrument distributions; |S| = 3.
// Throws ConstructionInvalid if enumeration no longer confirms this.
Scenario m3_demo_scenario();

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr std::array<double, 4> kCanonicalAngles = {0.0, kPi / 4, kPi / 8, 3 * kPi / 8};

// Analyzer angles (a for settings 1 and 2, then b for settings 1 and 2).
Scenario quantum_scenario(const std::array<double, 4>& angles = kCanonicalAngles);

struct ScenarioParams {
  double p_same = 1.0;
  bool flip_second_setting = false;
  std::array<double, 4> angles = kCanonicalAngles;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
};

std::vector<ScenarioInfo> list_scenarios();

// Looks up lf, lhvm-socks, m2-demo, m3-demo or quantum; nullopt if unknown.
std::optional<Scenario> scenario_by_name(const std::string& name, const ScenarioParams& params = {});

}  // namespace bellsim
