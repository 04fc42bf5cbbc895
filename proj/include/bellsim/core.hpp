#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bellsim/rng.hpp"

namespace bellsim {

// Outcome of one station in one trial; `none` means no click.
enum class Outcome : std::int8_t { minus = -1, none = 0, plus = 1 };

constexpr int value(Outcome o) noexcept { return static_cast<int>(o); }

constexpr bool is_click(Outcome o) noexcept { return o != Outcome::none; }

std::optional<Outcome> outcome_from_int(long v) noexcept;

struct SettingPair {
  int x = 0;
  int y = 0;

  friend constexpr auto operator<=>(const SettingPair&, const SettingPair&) = default;
};

enum class Variant { lhvm, m1, m2, m3, quantum_ref };

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> variant_from_string(std::string_view s) noexcept;

inline constexpr double kProbabilityTolerance = 1e-9;

struct DiscreteDistribution {
  std::vector<std::string> atoms;
  std::vector<double> probs;

  friend bool operator==(const DiscreteDistribution&, const DiscreteDistribution&) = default;
};

// One weighted cell of a distribution over a product of two atom lists.
struct JointAtom {
  std::size_t first = 0;
  std::size_t second = 0;
  double prob = 0.0;

  friend bool operator==(const JointAtom&, const JointAtom&) = default;
};

// p(lambda1, lambda2), stored sparsely over Lambda1 x Lambda2.
struct SourceDistribution {
  std::vector<std::string> lambda1;
  std::vector<std::string> lambda2;
  std::vector<JointAtom> support;

  friend bool operator==(const SourceDistribution&, const SourceDistribution&) = default;
};

// Deterministic response: rows are source atoms, columns instrument atoms.
struct ResponseTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Outcome> cells;

  ResponseTable() = default;
  ResponseTable(std::size_t r, std::size_t c, Outcome fill = Outcome::plus)
      : rows(r), cols(c), cells(r * c, fill) {}

  Outcome at(std::size_t source, std::size_t instrument) const {
    return cells[source * cols + instrument];
  }
  Outcome& at(std::size_t source, std::size_t instrument) {
    return cells[source * cols + instrument];
  }

  friend bool operator==(const ResponseTable&, const ResponseTable&) = default;
};

struct StationSetting {
  int label = 0;
  DiscreteDistribution instrument;  // p_x(lambda_x); the declared marginal for M3
  ResponseTable response;           // A_x(lambda1, lambda_x) or B_y(lambda2, lambda_y)
  double angle = 0.0;               // analyzer angle, QuantumRef only

  friend bool operator==(const StationSetting&, const StationSetting&) = default;
};

struct Station {
  std::vector<StationSetting> settings;

  std::optional<std::size_t> index_of(int label) const noexcept;
  std::vector<int> labels() const;

  friend bool operator==(const Station&, const Station&) = default;
};

// p_xy(lambda_x, lambda_y) for one setting pair (M3 only). Indices refer to
// the instrument atoms declared in the corresponding StationSettings.
struct PairInstrument {
  SettingPair sp;
  std::vector<JointAtom> support;

  friend bool operator==(const PairInstrument&, const PairInstrument&) = default;
};

// Continuous-density form of the contextual model. Such models can only be
// sampled; enumeration throws NonFiniteSpace.
struct ContinuousKernel {
  std::function<std::pair<double, double>(Rng&)> source;
  std::function<std::pair<double, double>(SettingPair, Rng&)> instruments;
  std::function<Outcome(int x, double lambda1, double lambda_x)> response_a;
  std::function<Outcome(int y, double lambda2, double lambda_y)> response_b;
};

struct ExperimentModel {
  Variant variant = Variant::m1;
  SourceDistribution source;
  Station station_a;
  Station station_b;
  std::vector<PairInstrument> joint_instruments;  // M3 only
  std::shared_ptr<const ContinuousKernel> continuous;

  bool sampler_only() const noexcept { return continuous != nullptr; }
  std::vector<SettingPair> setting_pairs() const;
  const PairInstrument* joint_for(SettingPair sp) const noexcept;

  friend bool operator==(const ExperimentModel&, const ExperimentModel&) = default;
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

std::vector<ValidationIssue> validate_model(const ExperimentModel& model);

// Throws InvalidModel listing every issue when the report is non-empty.
void require_valid(const ExperimentModel& model);

// Probability mass (or count) of each joint outcome; index = value + 1.
template <typename T>
struct OutcomeTable {
  std::array<std::array<T, 3>, 3> cell{};

  T& at(Outcome a, Outcome b) { return cell[value(a) + 1][value(b) + 1]; }
  const T& at(Outcome a, Outcome b) const { return cell[value(a) + 1][value(b) + 1]; }

  friend bool operator==(const OutcomeTable&, const OutcomeTable&) = default;
};

using MassTable = OutcomeTable<double>;
using CountTable = OutcomeTable<std::uint64_t>;

struct ExactResult {
  double e_ab = 0.0;
  double e_a = 0.0;
  double e_b = 0.0;
  double c_xy = 0.0;

  friend bool operator==(const ExactResult&, const ExactResult&) = default;
};

// Joint outcome masses for one setting pair by summing over the whole finite
// Lambda_xy (product instruments, or the per-pair joint for M3).
MassTable enumerate_masses(const ExperimentModel& model, SettingPair sp);

// Unconditional expectations over Lambda_xy, zero outcomes included.
ExactResult enumerate_raw(const ExperimentModel& model, SettingPair sp);

// Expectations conditioned on A_x B_y != 0, each divided by C_xy.
ExactResult enumerate_postselected(const ExperimentModel& model, SettingPair sp);

std::pair<Outcome, Outcome> sample_trial(const ExperimentModel& model, SettingPair sp,
                                         Rng& rng);

// Signed polarization correlation cos 2(theta_a - theta_b).
double quantum_reference_correlation(double theta_a, double theta_b) noexcept;

// Draws an index from a probability vector by inverse CDF.
std::size_t draw_index(std::span<const double> probs, Rng& rng) noexcept;

}  // namespace bellsim
