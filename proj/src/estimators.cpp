#include "bellsim/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "bellsim/errors.hpp"

namespace bellsim {

std::string_view to_string(Conditioning c) noexcept {
  return c == Conditioning::raw ? "raw" : "postselected";
}

const CorrelationCell* CorrelationSet::find(SettingPair sp) const noexcept {
  for (const auto& c : cells) {
    if (c.sp == sp) return &c;
  }
  return nullptr;
}

const CorrelationCell& CorrelationSet::at(SettingPair sp) const {
  if (const auto* c = find(sp)) return *c;
  throw MissingPair("no cell for setting pair (" + std::to_string(sp.x) + "," +
                    std::to_string(sp.y) + ")");
}

namespace {

std::string pair_name(SettingPair sp) {
  return "(" + std::to_string(sp.x) + "," + std::to_string(sp.y) + ")";
}

// Plug-in standard error of a mean: population SD / sqrt(n).
double plugin_se(double sum, double sum_sq, std::uint64_t n) {
  if (n == 0) return 0.0;
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, sum_sq / nn - mean * mean);
  return std::sqrt(var / nn);
}

}  // namespace

CorrelationCell cell_from_counts(SettingPair sp, const CountTable& counts, Conditioning c) {
  constexpr std::array<Outcome, 3> all = {Outcome::minus, Outcome::none, Outcome::plus};
  CorrelationCell cell;
  cell.sp = sp;
  double s_ab = 0, q_ab = 0, s_a = 0, q_a = 0, s_b = 0, q_b = 0;
  std::uint64_t n_used = 0;
  for (Outcome a : all) {
    for (Outcome b : all) {
      const std::uint64_t n = counts.at(a, b);
      cell.n_raw += n;
      const bool clicked = is_click(a) && is_click(b);
      if (clicked) cell.n_post += n;
      if (c == Conditioning::postselected && !clicked) continue;
      n_used += n;
      const double w = static_cast<double>(n);
      const int ab = value(a) * value(b);
      s_ab += ab * w;
      q_ab += ab * ab * w;
      s_a += value(a) * w;
      q_a += value(a) * value(a) * w;
      s_b += value(b) * w;
      q_b += value(b) * value(b) * w;
    }
  }
  if (n_used > 0) {
    const double n = static_cast<double>(n_used);
    cell.e_ab = s_ab / n;
    cell.e_a = s_a / n;
    cell.e_b = s_b / n;
  }
  cell.se_ab = plugin_se(s_ab, q_ab, n_used);
  cell.se_a = plugin_se(s_a, q_a, n_used);
  cell.se_b = plugin_se(s_b, q_b, n_used);
  cell.c_hat = cell.n_raw == 0 ? 0.0
                               : static_cast<double>(cell.n_post) / static_cast<double>(cell.n_raw);
  return cell;
}

namespace {

SettingOrder infer_order(std::span<const CoincidenceRecord> records) {
  std::set<int> a;
  std::set<int> b;
  for (const auto& r : records) {
    if (r.sp.x != kUnknownSetting) a.insert(r.sp.x);
    if (r.sp.y != kUnknownSetting) b.insert(r.sp.y);
  }
  return {{a.begin(), a.end()}, {b.begin(), b.end()}};
}

CorrelationSet estimate(std::span<const CoincidenceRecord> records,
                        const std::optional<SettingOrder>& order, Conditioning c) {
  const SettingOrder ord = order ? *order : infer_order(records);
  std::map<SettingPair, CountTable> counts;
  for (int x : ord.a) {
    for (int y : ord.b) counts[{x, y}];
  }
  std::uint64_t unassigned = 0;
  for (const auto& r : records) {
    if (r.a == Outcome::none && r.b == Outcome::none) {
      throw InvalidRecord("record for window " + std::to_string(r.window_index) +
                          " has no click at either station");
    }
    auto it = r.settings_known() ? counts.find(r.sp) : counts.end();
    if (it == counts.end()) {
      ++unassigned;
      continue;
    }
    ++it->second.at(r.a, r.b);
  }

  CorrelationSet cs;
  cs.conditioning = c;
  cs.settings_a = ord.a;
  cs.settings_b = ord.b;
  cs.unassigned = unassigned;
  for (int x : ord.a) {
    for (int y : ord.b) {
      auto cell = cell_from_counts({x, y}, counts[{x, y}], c);
      const std::uint64_t n = c == Conditioning::raw ? cell.n_raw : cell.n_post;
      if (n == 0) {
        throw EmptyCell(std::string(c == Conditioning::raw ? "no records" : "no records with a*b != 0") +
                        " for setting pair " + pair_name({x, y}));
      }
      cs.cells.push_back(cell);
    }
  }
  return cs;
}

}  // namespace

CorrelationSet estimate_raw(std::span<const CoincidenceRecord> records,
                            const std::optional<SettingOrder>& order) {
  return estimate(records, order, Conditioning::raw);
}

CorrelationSet estimate_postselected(std::span<const CoincidenceRecord> records,
                                     const std::optional<SettingOrder>& order) {
  return estimate(records, order, Conditioning::postselected);
}

CorrelationSet estimate_from_tallies(std::span<const PairTally> tallies, Conditioning c,
                                     const SettingOrder& order) {
  CorrelationSet cs;
  cs.conditioning = c;
  cs.settings_a = order.a;
  cs.settings_b = order.b;
  for (int x : order.a) {
    for (int y : order.b) {
      const auto it = std::find_if(tallies.begin(), tallies.end(),
                                   [&](const PairTally& t) { return t.sp == SettingPair{x, y}; });
      if (it == tallies.end()) throw MissingPair("no tally for setting pair " + pair_name({x, y}));
      auto cell = cell_from_counts({x, y}, it->counts, c);
      if ((c == Conditioning::raw ? cell.n_raw : cell.n_post) == 0) {
        throw EmptyCell("no usable trials for setting pair " + pair_name({x, y}));
      }
      cs.cells.push_back(cell);
    }
  }
  return cs;
}

CorrelationSet exact_correlations(const ExperimentModel& model, Conditioning c) {
  CorrelationSet cs;
  cs.conditioning = c;
  cs.exact = true;
  cs.settings_a = model.station_a.labels();
  cs.settings_b = model.station_b.labels();
  for (const auto& sp : model.setting_pairs()) {
    const ExactResult r =
        c == Conditioning::raw ? enumerate_raw(model, sp) : enumerate_postselected(model, sp);
    CorrelationCell cell;
    cell.sp = sp;
    cell.e_ab = r.e_ab;
    cell.e_a = r.e_a;
    cell.e_b = r.e_b;
    cell.c_hat = r.c_xy;
    cs.cells.push_back(cell);
  }
  return cs;
}

const std::array<SignPattern, 8>& chsh_patterns() noexcept {
  static const std::array<SignPattern, 8> patterns = [] {
    std::array<SignPattern, 8> out{};
    std::size_t k = 0;
    for (unsigned m = 0; m < 16; ++m) {
      SignPattern p{};
      int minus = 0;
      for (unsigned i = 0; i < 4; ++i) {
        const bool neg = (m >> (3 - i)) & 1U;
        p[i] = neg ? -1 : 1;
        minus += neg ? 1 : 0;
      }
      if (minus % 2 == 1) out[k++] = p;
    }
    return out;
  }();
  return patterns;
}

std::string pattern_name(const SignPattern& p) {
  std::string s;
  for (int v : p) s += v > 0 ? '+' : '-';
  return s;
}

ChshReport chsh_from_correlators(const std::array<double, 4>& e, const std::array<double, 4>& se) {
  ChshReport r;
  r.correlators = e;
  const auto& patterns = chsh_patterns();
  for (std::size_t k = 0; k < patterns.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += patterns[k][i] * e[i];
    r.s_values[k] = s;
    if (std::abs(s) > r.s_max_abs) {
      r.s_max_abs = std::abs(s);
      r.max_pattern = k;
    }
  }
  double var = 0.0;
  for (double v : se) var += v * v;
  r.se_s = std::sqrt(var);
  if (r.s_max_abs > kChshBound + kViolationSlack) r.violating_pattern = r.max_pattern;
  return r;
}

namespace {

void require_two_by_two(const CorrelationSet& cs) {
  if (cs.settings_a.size() < 2 || cs.settings_b.size() < 2) {
    throw MissingPair("CHSH needs two settings per station");
  }
  if (cs.settings_a.size() > 2 || cs.settings_b.size() > 2) {
    throw std::invalid_argument("CHSH is defined for exactly two settings per station");
  }
}

}  // namespace

ChshReport chsh(const CorrelationSet& cs) {
  require_two_by_two(cs);
  std::array<double, 4> e{};
  std::array<double, 4> se{};
  std::size_t i = 0;
  for (int x : cs.settings_a) {
    for (int y : cs.settings_b) {
      const auto& cell = cs.at({x, y});
      e[i] = cell.e_ab;
      se[i] = cell.se_ab;
      ++i;
    }
  }
  auto r = chsh_from_correlators(e, se);
  r.conditioning = cs.conditioning;
  return r;
}

double NoSignallingReport::max_abs_delta() const noexcept {
  double m = 0.0;
  for (const auto& d : deltas) m = std::max(m, std::abs(d.delta));
  return m;
}

NoSignallingReport no_signalling(const CorrelationSet& cs) {
  require_two_by_two(cs);
  auto make = [](char station, int own, int r0, int r1, double m0, double se0, double m1,
                 double se1) {
    SignallingDelta d;
    d.station = station;
    d.setting = own;
    d.remote_first = r0;
    d.remote_second = r1;
    d.delta = m0 - m1;
    const double pooled = std::sqrt(se0 * se0 + se1 * se1);
    if (pooled > 0.0) d.z = d.delta / pooled;
    return d;
  };
  NoSignallingReport r;
  r.conditioning = cs.conditioning;
  const int y0 = cs.settings_b[0], y1 = cs.settings_b[1];
  const int x0 = cs.settings_a[0], x1 = cs.settings_a[1];
  for (std::size_t i = 0; i < 2; ++i) {
    const int x = cs.settings_a[i];
    const auto& c0 = cs.at({x, y0});
    const auto& c1 = cs.at({x, y1});
    r.deltas[i] = make('A', x, y0, y1, c0.e_a, c0.se_a, c1.e_a, c1.se_a);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const int y = cs.settings_b[i];
    const auto& c0 = cs.at({x0, y});
    const auto& c1 = cs.at({x1, y});
    r.deltas[2 + i] = make('B', y, x0, x1, c0.e_b, c0.se_b, c1.e_b, c1.se_b);
  }
  return r;
}

}  // namespace bellsim
