#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bellsim/core.hpp"
#include "bellsim/montecarlo.hpp"
#include "bellsim/streams.hpp"

namespace bellsim {

enum class Conditioning { raw, postselected };

std::string_view to_string(Conditioning c) noexcept;

struct CorrelationCell {
  SettingPair sp;
  double e_ab = 0.0;
  double e_a = 0.0;
  double e_b = 0.0;
  double se_ab = 0.0;
  double se_a = 0.0;
  double se_b = 0.0;
  std::uint64_t n_raw = 0;   // all records of this pair
  std::uint64_t n_post = 0;  // records with a*b != 0
  double c_hat = 0.0;        // n_post / n_raw, or the exact C_xy
};

struct CorrelationSet {
  Conditioning conditioning = Conditioning::postselected;
  bool exact = false;  // from enumeration: standard errors are zero, counts unused
  std::vector<int> settings_a;
  std::vector<int> settings_b;
  std::vector<CorrelationCell> cells;  // settings_a-major
  std::uint64_t unassigned = 0;        // records whose setting pair is unknown

  // Throws MissingPair when the pair is absent.
  const CorrelationCell& at(SettingPair sp) const;
  const CorrelationCell* find(SettingPair sp) const noexcept;
};

struct SettingOrder {
  std::vector<int> a;
  std::vector<int> b;
};

// Means over all records of a pair, zeros included. Records with (a, b) =
// (0, 0) are rejected with InvalidRecord; records of unknown setting are
// counted in `unassigned`. Without `order` the settings are the sorted labels
// seen in the records. Throws EmptyCell when some pair has no record.
CorrelationSet estimate_raw(std::span<const CoincidenceRecord> records,
                            const std::optional<SettingOrder>& order = std::nullopt);

// Means over records with a*b != 0; conditional marginals use n_post.
// Throws EmptyCell when some pair has no such record.
CorrelationSet estimate_postselected(std::span<const CoincidenceRecord> records,
                                     const std::optional<SettingOrder>& order = std::nullopt);

// Estimates from Monte Carlo outcome counts (see tally_all_pairs).
CorrelationSet estimate_from_tallies(std::span<const PairTally> tallies, Conditioning c,
                                     const SettingOrder& order);

// Exact values from enumeration (or the analytic QuantumRef law).
CorrelationSet exact_correlations(const ExperimentModel& model, Conditioning c);

// The statistics of one cell from its outcome counts.
CorrelationCell cell_from_counts(SettingPair sp, const CountTable& counts, Conditioning c);

using SignPattern = std::array<int, 4>;

// The 8 sign patterns with an odd number of minus signs, applied to the
// correlators ordered (x0y0, x0y1, x1y0, x1y1).
const std::array<SignPattern, 8>& chsh_patterns() noexcept;

std::string pattern_name(const SignPattern& p);

struct ChshReport {
  Conditioning conditioning = Conditioning::postselected;
  std::array<double, 4> correlators{};
  std::array<double, 8> s_values{};
  double s_max_abs = 0.0;
  std::size_t max_pattern = 0;
  double se_s = 0.0;
  std::optional<std::size_t> violating_pattern;  // max_pattern when s_max_abs > 2
};

inline constexpr double kChshBound = 2.0;
inline constexpr double kViolationSlack = 1e-12;

ChshReport chsh_from_correlators(const std::array<double, 4>& e,
                                 const std::array<double, 4>& se = {});

// Requires exactly two settings per station; MissingPair otherwise.
ChshReport chsh(const CorrelationSet& cs);

struct SignallingDelta {
  char station = 'A';        // the station whose marginal is compared
  int setting = 0;           // its own setting
  int remote_first = 0;      // remote settings being compared
  int remote_second = 0;
  double delta = 0.0;        // marginal under remote_first minus under remote_second
  std::optional<double> z;   // absent when the pooled standard error is zero
};

struct NoSignallingReport {
  Conditioning conditioning = Conditioning::postselected;
  std::array<SignallingDelta, 4> deltas{};  // A at x0, A at x1, B at y0, B at y1

  double max_abs_delta() const noexcept;
};

NoSignallingReport no_signalling(const CorrelationSet& cs);

}  // namespace bellsim
