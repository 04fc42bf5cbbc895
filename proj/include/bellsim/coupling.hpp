#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bellsim/estimators.hpp"

namespace bellsim {

// Observed singleton and pairwise moments of (A_x0, A_x1, B_y0, B_y1).
struct JointSpec {
  std::array<int, 2> settings_a{1, -1};
  std::array<int, 2> settings_b{1, -1};
  std::array<std::array<double, 2>, 2> e_ab{};  // [i][j] = E(A_xi B_yj)
  std::array<std::array<double, 2>, 2> e_a{};   // [i][j] = E(A_xi) measured with y_j
  std::array<std::array<double, 2>, 2> e_b{};   // [i][j] = E(B_yj) measured with x_i

  friend bool operator==(const JointSpec&, const JointSpec&) = default;
};

// Requires two settings per station.
JointSpec joint_spec_from(const CorrelationSet& cs);

inline constexpr double kMomentTolerance = 1e-9;

// Probabilities over {+-1}^4. Atom m gives variable v (order A_x0, A_x1,
// B_y0, B_y1) the value -1 when bit (3 - v) of m is set.
using JointDistribution = std::array<double, 16>;

int atom_value(std::size_t atom, std::size_t variable) noexcept;
std::string atom_label(std::size_t atom);

// Moments of a joint distribution, with marginals copied to both remote settings.
JointSpec moments_of(const JointDistribution& p, std::array<int, 2> settings_a = {1, -1},
                     std::array<int, 2> settings_b = {1, -1});

struct MarginalCheck {
  bool consistent = true;
  std::vector<std::string> offending;
};

MarginalCheck marginal_consistency(const JointSpec& spec);

struct Certificate {
  std::string constraint;
  double value = 0.0;
};

struct CouplingResult {
  bool feasible = false;
  std::optional<JointDistribution> witness;
  std::optional<Certificate> certificate;
  double max_residual = 0.0;  // witness moment error
};

// Decides by linear feasibility over the 16 atoms whether a joint distribution
// reproduces the 4 marginals and 4 correlators of a JointSpec.
CouplingResult coupling_feasibility(const JointSpec& spec);

// All 8 CHSH sign variants within |S| <= 2 (false on inconsistent marginals).
bool chsh_characterization(const JointSpec& spec);

// The explicit coupling A'_x = x^L, B'_y = y^(L+1), L uniform on {1..6},
// over variable order (A'_1, A'_-1, B'_1, B'_-1).
JointDistribution lf_coupling();

// Text format: `settings_a = x0 x1`, `settings_b = y0 y1`, and the 12 entries
// `e_ab(x,y) = v`, `e_a(x,y) = v`, `e_b(x,y) = v`. '#' starts a comment.
JointSpec read_joint_spec(std::istream& in, const std::string& source_name);
void write_joint_spec(const JointSpec& spec, std::ostream& out);

// `p(<a0>,<a1>,<b0>,<b1>) = prob`, one line per atom.
void write_witness(const JointDistribution& p, const JointSpec& spec, std::ostream& out);

nlohmann::ordered_json to_json(const CouplingResult& r, const JointSpec& spec);

namespace detail {

struct PhaseOneResult {
  double infeasibility = 0.0;  // minimum sum of artificial variables
  std::vector<double> x;
};

// Minimizes the artificial sum for A x = b, x >= 0 by the tableau simplex
// with Bland's rule. `a` is row-major, rows x cols.
PhaseOneResult phase_one(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                         std::vector<double> b);

}  // namespace detail

}  // namespace bellsim
