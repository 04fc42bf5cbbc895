#include "bellsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bellsim/errors.hpp"

namespace bellsim {

std::optional<Outcome> outcome_from_int(long v) noexcept {
  switch (v) {
    case -1: return Outcome::minus;
    case 0: return Outcome::none;
    case 1: return Outcome::plus;
    default: return std::nullopt;
  }
}

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::lhvm: return "LHVM";
    case Variant::m1: return "M1";
    case Variant::m2: return "M2";
    case Variant::m3: return "M3";
    case Variant::quantum_ref: return "QuantumRef";
  }
  return "?";
}

std::optional<Variant> variant_from_string(std::string_view s) noexcept {
  for (Variant v : {Variant::lhvm, Variant::m1, Variant::m2, Variant::m3, Variant::quantum_ref}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<std::size_t> Station::index_of(int label) const noexcept {
  for (std::size_t i = 0; i < settings.size(); ++i) {
    if (settings[i].label == label) return i;
  }
  return std::nullopt;
}

std::vector<int> Station::labels() const {
  std::vector<int> out;
  out.reserve(settings.size());
  for (const auto& s : settings) out.push_back(s.label);
  return out;
}

std::vector<SettingPair> ExperimentModel::setting_pairs() const {
  std::vector<SettingPair> out;
  for (const auto& a : station_a.settings) {
    for (const auto& b : station_b.settings) out.push_back({a.label, b.label});
  }
  return out;
}

const PairInstrument* ExperimentModel::joint_for(SettingPair sp) const noexcept {
  for (const auto& j : joint_instruments) {
    if (j.sp == sp) return &j;
  }
  return nullptr;
}

namespace {

class IssueList {
 public:
  void add(std::string field, std::string message) {
    issues_.push_back({std::move(field), std::move(message)});
  }
  std::size_t size() const noexcept { return issues_.size(); }
  std::vector<ValidationIssue> take() { return std::move(issues_); }

 private:
  std::vector<ValidationIssue> issues_;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check_atoms_distinct(const std::vector<std::string>& atoms, const std::string& field,
                          IssueList& issues) {
  std::set<std::string> seen;
  for (const auto& a : atoms) {
    if (!seen.insert(a).second) issues.add(field, "duplicate atom '" + a + "'");
  }
}

void check_weights(std::span<const double> probs, const std::string& field, IssueList& issues) {
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      issues.add(field, "probability " + fmt_double(p) + " is not a finite non-negative number");
      return;
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    issues.add(field, "probabilities sum to " + fmt_double(total) + ", expected 1");
  }
}

void check_joint(const std::vector<JointAtom>& support, std::size_t n1, std::size_t n2,
                 const std::string& field, IssueList& issues) {
  if (support.empty()) {
    issues.add(field, "empty support");
    return;
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<double> probs;
  for (const auto& atom : support) {
    if (atom.first >= n1 || atom.second >= n2) {
      issues.add(field, "atom index out of range");
      return;
    }
    if (!seen.insert({atom.first, atom.second}).second) {
      issues.add(field, "duplicate atom");
      return;
    }
    probs.push_back(atom.prob);
  }
  check_weights(probs, field, issues);
}

void check_station(const ExperimentModel& model, const Station& station, char name,
                   std::size_t source_atoms, IssueList& issues) {
  const std::string prefix = std::string("station ") + name;
  if (station.settings.size() < 2) {
    issues.add(prefix, "needs at least two settings");
  }
  std::set<int> labels;
  for (const auto& s : station.settings) {
    const std::string field = prefix + " setting " + std::to_string(s.label);
    if (!labels.insert(s.label).second) issues.add(field, "duplicate setting label");
    if (model.sampler_only()) continue;
    if (model.variant == Variant::quantum_ref) {
      if (!std::isfinite(s.angle)) issues.add(field, "analyzer angle is not finite");
      continue;
    }
    const auto& inst = s.instrument;
    if (inst.atoms.empty()) {
      issues.add(field + " instrument", "no instrument atoms");
    } else if (inst.atoms.size() != inst.probs.size()) {
      issues.add(field + " instrument", "atom and probability counts differ");
    } else {
      check_atoms_distinct(inst.atoms, field + " instrument", issues);
      check_weights(inst.probs, field + " instrument", issues);
    }
    const auto& r = s.response;
    if (r.rows != source_atoms || r.cols != inst.atoms.size() ||
        r.cells.size() != r.rows * r.cols) {
      issues.add(field + " response", "table is not total on source x instrument atoms");
      continue;
    }
    bool bad_value = false;
    bool zero = false;
    for (Outcome o : r.cells) {
      if (!outcome_from_int(value(o))) bad_value = true;
      if (o == Outcome::none) zero = true;
    }
    if (bad_value) issues.add(field + " response", "outcome outside {-1, 0, +1}");
    if (zero && model.variant == Variant::lhvm) {
      issues.add(field + " response", "LHVM response outputs 0");
    }
  }
}

void check_m3_marginals(const ExperimentModel& model, const PairInstrument& joint,
                        const std::string& field, IssueList& issues) {
  const auto ia = model.station_a.index_of(joint.sp.x);
  const auto ib = model.station_b.index_of(joint.sp.y);
  const auto& pa = model.station_a.settings[*ia].instrument.probs;
  const auto& pb = model.station_b.settings[*ib].instrument.probs;
  std::vector<double> ma(pa.size(), 0.0);
  std::vector<double> mb(pb.size(), 0.0);
  for (const auto& atom : joint.support) {
    ma[atom.first] += atom.prob;
    mb[atom.second] += atom.prob;
  }
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (std::abs(ma[i] - pa[i]) > kProbabilityTolerance) {
      issues.add(field, "marginal over station A instrument does not match declared p_x");
      break;
    }
  }
  for (std::size_t i = 0; i < pb.size(); ++i) {
    if (std::abs(mb[i] - pb[i]) > kProbabilityTolerance) {
      issues.add(field, "marginal over station B instrument does not match declared p_y");
      break;
    }
  }
}

}  // namespace

std::vector<ValidationIssue> validate_model(const ExperimentModel& model) {
  IssueList issues;
  const bool tabled = !model.sampler_only() && model.variant != Variant::quantum_ref;

  if (tabled) {
    const auto& src = model.source;
    check_atoms_distinct(src.lambda1, "source lambda1", issues);
    check_atoms_distinct(src.lambda2, "source lambda2", issues);
    check_joint(src.support, src.lambda1.size(), src.lambda2.size(), "source", issues);
  }
  check_station(model, model.station_a, 'A', model.source.lambda1.size(), issues);
  check_station(model, model.station_b, 'B', model.source.lambda2.size(), issues);

  if (model.variant == Variant::m3 && !model.sampler_only()) {
    for (const auto& sp : model.setting_pairs()) {
      const std::string field =
          "joint instrument (" + std::to_string(sp.x) + "," + std::to_string(sp.y) + ")";
      const auto* joint = model.joint_for(sp);
      if (joint == nullptr) {
        issues.add(field, "missing for this setting pair");
        continue;
      }
      const auto ia = model.station_a.index_of(sp.x);
      const auto ib = model.station_b.index_of(sp.y);
      const std::size_t na = model.station_a.settings[*ia].instrument.probs.size();
      const std::size_t nb = model.station_b.settings[*ib].instrument.probs.size();
      const std::size_t before = issues.size();
      check_joint(joint->support, na, nb, field, issues);
      if (issues.size() == before) check_m3_marginals(model, *joint, field, issues);
    }
    for (const auto& joint : model.joint_instruments) {
      if (!model.station_a.index_of(joint.sp.x) || !model.station_b.index_of(joint.sp.y)) {
        issues.add("joint instrument", "refers to an undeclared setting");
      }
    }
  } else if (!model.joint_instruments.empty()) {
    issues.add("joint instrument", "only M3 models carry joint instrument distributions");
  }
  return issues.take();
}

void require_valid(const ExperimentModel& model) {
  const auto issues = validate_model(model);
  if (issues.empty()) return;
  std::string msg = "invalid model:";
  for (const auto& issue : issues) msg += "\n  " + issue.field + ": " + issue.message;
  throw InvalidModel(msg);
}

namespace {

struct SettingIndices {
  std::size_t a;
  std::size_t b;
};

SettingIndices lookup(const ExperimentModel& model, SettingPair sp) {
  const auto ia = model.station_a.index_of(sp.x);
  const auto ib = model.station_b.index_of(sp.y);
  if (!ia || !ib) {
    throw InvalidModel("setting pair (" + std::to_string(sp.x) + "," + std::to_string(sp.y) +
                       ") is not declared by the model");
  }
  return {*ia, *ib};
}

constexpr std::array<Outcome, 3> kOutcomes = {Outcome::minus, Outcome::none, Outcome::plus};

// Sums over all nine cells in a fixed order; the conditioned sums visit the
// clicking cells in the same order, so C_xy = 1 reproduces the raw values bit
// for bit.
ExactResult reduce(const MassTable& m, bool postselected, SettingPair sp) {
  double total = 0.0;
  double s_ab = 0.0;
  double s_a = 0.0;
  double s_b = 0.0;
  double clicked = 0.0;
  for (Outcome a : kOutcomes) {
    for (Outcome b : kOutcomes) {
      const double w = m.at(a, b);
      total += w;
      if (postselected && (!is_click(a) || !is_click(b))) continue;
      s_ab += value(a) * value(b) * w;
      s_a += value(a) * w;
      s_b += value(b) * w;
    }
  }
  for (Outcome a : {Outcome::minus, Outcome::plus}) {
    for (Outcome b : {Outcome::minus, Outcome::plus}) clicked += m.at(a, b);
  }
  if (postselected && clicked <= 0.0) {
    throw DegenerateConditioning("C_xy = 0 at setting pair (" + std::to_string(sp.x) + "," +
                                 std::to_string(sp.y) + ")");
  }
  const double norm = postselected ? clicked : total;
  ExactResult r;
  r.e_ab = s_ab / norm;
  r.e_a = s_a / norm;
  r.e_b = s_b / norm;
  r.c_xy = std::clamp(clicked / total, 0.0, 1.0);
  return r;
}

}  // namespace

MassTable enumerate_masses(const ExperimentModel& model, SettingPair sp) {
  if (model.sampler_only()) {
    throw NonFiniteSpace("model has sampler-only spaces; exact enumeration is unavailable");
  }
  const auto idx = lookup(model, sp);
  MassTable m;
  if (model.variant == Variant::quantum_ref) {
    // P(a = b) = cos^2(delta), uniform marginals.
    const double same = 0.5 * (1.0 + quantum_reference_correlation(
                                         model.station_a.settings[idx.a].angle,
                                         model.station_b.settings[idx.b].angle));
    m.at(Outcome::plus, Outcome::plus) = 0.5 * same;
    m.at(Outcome::minus, Outcome::minus) = 0.5 * same;
    m.at(Outcome::plus, Outcome::minus) = 0.5 * (1.0 - same);
    m.at(Outcome::minus, Outcome::plus) = 0.5 * (1.0 - same);
    return m;
  }

  const auto& sa = model.station_a.settings[idx.a];
  const auto& sb = model.station_b.settings[idx.b];
  auto accumulate = [&](std::size_t ix, std::size_t iy, double instrument_weight) {
    for (const auto& src : model.source.support) {
      const double w = src.prob * instrument_weight;
      if (w == 0.0) continue;
      m.at(sa.response.at(src.first, ix), sb.response.at(src.second, iy)) += w;
    }
  };

  if (model.variant == Variant::m3) {
    const auto* joint = model.joint_for(sp);
    if (joint == nullptr) throw InvalidModel("M3 model lacks a joint instrument distribution");
    for (const auto& atom : joint->support) accumulate(atom.first, atom.second, atom.prob);
  } else {
    for (std::size_t ix = 0; ix < sa.instrument.probs.size(); ++ix) {
      for (std::size_t iy = 0; iy < sb.instrument.probs.size(); ++iy) {
        accumulate(ix, iy, sa.instrument.probs[ix] * sb.instrument.probs[iy]);
      }
    }
  }
  return m;
}

ExactResult enumerate_raw(const ExperimentModel& model, SettingPair sp) {
  return reduce(enumerate_masses(model, sp), false, sp);
}

ExactResult enumerate_postselected(const ExperimentModel& model, SettingPair sp) {
  return reduce(enumerate_masses(model, sp), true, sp);
}

std::size_t draw_index(std::span<const double> probs, Rng& rng) noexcept {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  // Rounding left u above the accumulated total.
  return last_positive;
}

namespace {

std::size_t draw_joint(const std::vector<JointAtom>& support, Rng& rng) noexcept {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].prob <= 0.0) continue;
    acc += support[i].prob;
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace

std::pair<Outcome, Outcome> sample_trial(const ExperimentModel& model, SettingPair sp,
                                         Rng& rng) {
  if (model.sampler_only()) {
    const auto& k = *model.continuous;
    const auto [l1, l2] = k.source(rng);
    const auto [lx, ly] = k.instruments(sp, rng);
    return {k.response_a(sp.x, l1, lx), k.response_b(sp.y, l2, ly)};
  }
  const auto idx = lookup(model, sp);
  if (model.variant == Variant::quantum_ref) {
    const double corr = quantum_reference_correlation(model.station_a.settings[idx.a].angle,
                                                      model.station_b.settings[idx.b].angle);
    const Outcome a = rng.uniform() < 0.5 ? Outcome::plus : Outcome::minus;
    const bool same = rng.uniform() < 0.5 * (1.0 + corr);
    const Outcome b = same ? a : (a == Outcome::plus ? Outcome::minus : Outcome::plus);
    return {a, b};
  }

  const auto& sa = model.station_a.settings[idx.a];
  const auto& sb = model.station_b.settings[idx.b];
  const auto& src = model.source.support[draw_joint(model.source.support, rng)];
  std::size_t ix = 0;
  std::size_t iy = 0;
  if (model.variant == Variant::m3) {
    const auto* joint = model.joint_for(sp);
    if (joint == nullptr) throw InvalidModel("M3 model lacks a joint instrument distribution");
    const auto& atom = joint->support[draw_joint(joint->support, rng)];
    ix = atom.first;
    iy = atom.second;
  } else {
    ix = draw_index(sa.instrument.probs, rng);
    iy = draw_index(sb.instrument.probs, rng);
  }
  return {sa.response.at(src.first, ix), sb.response.at(src.second, iy)};
}

double quantum_reference_correlation(double theta_a, double theta_b) noexcept {
  return std::cos(2.0 * (theta_a - theta_b));
}

}  // namespace bellsim
