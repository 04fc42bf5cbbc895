#include "bellsim/scenarios.hpp"

#include <cmath>
#include <stdexcept>

#include "bellsim/errors.hpp"

namespace bellsim {

namespace {

DiscreteDistribution single_atom(const std::string& name) { return {{name}, {1.0}}; }

Outcome sign_outcome(int v) { return v > 0 ? Outcome::plus : Outcome::minus; }

SourceDistribution shared_uniform(const std::vector<std::string>& atoms) {
  SourceDistribution src;
  src.lambda1 = atoms;
  src.lambda2 = atoms;
  const double p = 1.0 / static_cast<double>(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) src.support.push_back({i, i, p});
  return src;
}

double max_abs_s(const CorrelationSet& cs) { return chsh(cs).s_max_abs; }

}  // namespace

Scenario lf_scenario() {
  ExperimentModel m;
  m.variant = Variant::m1;
  m.source = shared_uniform({"1", "2", "3", "4", "5", "6"});
  auto power = [](int base, int exp) { return (base == -1 && exp % 2 != 0) ? -1 : 1; };
  for (int setting : {1, -1}) {
    StationSetting a{setting, single_atom("-"), ResponseTable(6, 1), 0.0};
    StationSetting b{setting, single_atom("-"), ResponseTable(6, 1), 0.0};
    for (int lambda = 1; lambda <= 6; ++lambda) {
      a.response.at(lambda - 1, 0) = sign_outcome(power(setting, lambda));
      b.response.at(lambda - 1, 0) = sign_outcome(power(setting, lambda + 1));
    }
    m.station_a.settings.push_back(std::move(a));
    m.station_b.settings.push_back(std::move(b));
  }

  ScenarioExpectation post;
  post.conditioning = Conditioning::postselected;
  // E(A_1) = E(B_1) = 1; E(A_-1) = E(B_-1) = 0.
  post.cells = {{{1, 1}, 1.0, 1.0, 1.0, 1.0},
                {{1, -1}, 0.0, 1.0, 0.0, 1.0},
                {{-1, 1}, 0.0, 0.0, 1.0, 1.0},
                {{-1, -1}, -1.0, 0.0, 0.0, 1.0}};
  post.s_max_abs = 2.0;
  ScenarioExpectation raw = post;
  raw.conditioning = Conditioning::raw;
  return {"lf", std::move(m), {post, raw}, false};
}

Scenario lhvm_socks_scenario(double p_same, bool flip_second_setting) {
  if (!(p_same >= 0.0 && p_same <= 1.0)) throw std::invalid_argument("p_same must lie in [0, 1]");
  ExperimentModel m;
  m.variant = Variant::lhvm;
  m.source.lambda1 = {"+", "-"};
  m.source.lambda2 = {"+", "-"};
  m.source.support = {{0, 0, 0.5 * p_same},
                      {0, 1, 0.5 * (1.0 - p_same)},
                      {1, 0, 0.5 * (1.0 - p_same)},
                      {1, 1, 0.5 * p_same}};
  std::array<int, 2> sign{1, flip_second_setting ? -1 : 1};
  for (std::size_t k = 0; k < 2; ++k) {
    const int label = static_cast<int>(k) + 1;
    StationSetting s{label, single_atom("-"), ResponseTable(2, 1), 0.0};
    s.response.at(0, 0) = sign_outcome(sign[k]);
    s.response.at(1, 0) = sign_outcome(-sign[k]);
    m.station_a.settings.push_back(s);
    m.station_b.settings.push_back(s);
  }

  ScenarioExpectation post;
  post.conditioning = Conditioning::postselected;
  const double corr = 2.0 * p_same - 1.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      post.cells.push_back({{static_cast<int>(i) + 1, static_cast<int>(j) + 1},
                            sign[i] * sign[j] * corr, 0.0, 0.0, 1.0});
    }
  }
  post.s_max_abs = 2.0 * std::abs(corr);
  ScenarioExpectation raw = post;
  raw.conditioning = Conditioning::raw;
  return {"lhvm-socks", std::move(m), {post, raw}, true};
}

Scenario m2_demo_scenario() {
  // Source: lambda uniform on 8 atoms, shared. Instruments decide whether a
  // detector fires ("open") or stays silent ("blind"); the base responses
  // below apply when open. The single zero at A setting 2, lambda l0 is what
  // makes post-selection bite.
  constexpr std::array<std::array<int, 8>, 2> base_a = {{{1, -1, -1, 1, 1, 1, -1, 1},
                                                          {0, 1, -1, -1, -1, -1, 1, -1}}};
  constexpr std::array<std::array<int, 8>, 2> base_b = {{{1, -1, 1, 1, 1, 1, -1, 1},
                                                          {1, 1, -1, 1, -1, -1, 1, -1}}};
  constexpr std::array<double, 2> open_a = {1.0, 0.75};
  constexpr std::array<double, 2> open_b = {1.0, 0.5};

  ExperimentModel m;
  m.variant = Variant::m2;
  m.source = shared_uniform({"l0", "l1", "l2", "l3", "l4", "l5", "l6", "l7"});
  auto station = [](const std::array<std::array<int, 8>, 2>& base,
                    const std::array<double, 2>& open) {
    Station st;
    for (std::size_t k = 0; k < 2; ++k) {
      StationSetting s;
      s.label = static_cast<int>(k) + 1;
      if (open[k] < 1.0) {
        s.instrument = {{"open", "blind"}, {open[k], 1.0 - open[k]}};
      } else {
        s.instrument = single_atom("open");
      }
      s.response = ResponseTable(8, s.instrument.atoms.size(), Outcome::none);
      for (std::size_t l = 0; l < 8; ++l) {
        s.response.at(l, 0) = *outcome_from_int(base[k][l]);
      }
      st.settings.push_back(std::move(s));
    }
    return st;
  };
  m.station_a = station(base_a, open_a);
  m.station_b = station(base_b, open_b);

  ScenarioExpectation post;
  post.conditioning = Conditioning::postselected;
  post.cells = {{{1, 1}, 3.0 / 4, 1.0 / 4, 1.0 / 2, 1.0},
                {{1, 2}, -1.0 / 4, 1.0 / 4, 0.0, 1.0 / 2},
                {{2, 1}, -1.0, -3.0 / 7, 3.0 / 7, 21.0 / 32},
                {{2, 2}, 5.0 / 7, -3.0 / 7, -1.0 / 7, 21.0 / 64}};
  post.s_max_abs = 31.0 / 14;
  ScenarioExpectation raw;
  raw.conditioning = Conditioning::raw;
  raw.cells = {{{1, 1}, 3.0 / 4, 1.0 / 4, 1.0 / 2, 1.0},
               {{1, 2}, -1.0 / 8, 1.0 / 4, 0.0, 1.0 / 2},
               {{2, 1}, -21.0 / 32, -9.0 / 32, 1.0 / 2, 21.0 / 32},
               {{2, 2}, 15.0 / 64, -9.0 / 32, 0.0, 21.0 / 64}};
  raw.s_max_abs = 97.0 / 64;

  Scenario sc{"m2-demo", std::move(m), {post, raw}, false};

  const auto raw_cs = exact_correlations(sc.model, Conditioning::raw);
  const auto post_cs = exact_correlations(sc.model, Conditioning::postselected);
  if (max_abs_s(raw_cs) > kChshBound) {
    throw ConstructionInvalid("m2-demo: raw correlations exceed |S| <= 2");
  }
  if (!(max_abs_s(post_cs) > kChshBound)) {
    throw ConstructionInvalid("m2-demo: post-selected correlations do not exceed |S| <= 2");
  }
  if (!(no_signalling(post_cs).max_abs_delta() > 0.0)) {
    throw ConstructionInvalid("m2-demo: post-selected marginals do not signal");
  }
  return sc;
}

Scenario m3_demo_scenario() {
  // A = lambda1 * lambda_x, B = lambda2 * lambda_y with lambda1 = lambda2, so
  // E(AB) = E(lambda_x lambda_y) = c_xy, set by the joint instrument law.
  constexpr double kCorr = 0.75;
  ExperimentModel m;
  m.variant = Variant::m3;
  m.source = shared_uniform({"s+", "s-"});
  for (int label : {1, 2}) {
    StationSetting s;
    s.label = label;
    s.instrument = {{"i+", "i-"}, {0.5, 0.5}};
    s.response = ResponseTable(2, 2);
    for (std::size_t src = 0; src < 2; ++src) {
      for (std::size_t inst = 0; inst < 2; ++inst) {
        s.response.at(src, inst) = src == inst ? Outcome::plus : Outcome::minus;
      }
    }
    m.station_a.settings.push_back(s);
    m.station_b.settings.push_back(s);
  }
  ScenarioExpectation post;
  post.conditioning = Conditioning::postselected;
  for (int x : {1, 2}) {
    for (int y : {1, 2}) {
      const double c = (x == 2 && y == 2) ? -kCorr : kCorr;
      const double same = 0.25 * (1.0 + c);
      const double diff = 0.25 * (1.0 - c);
      m.joint_instruments.push_back({{x, y}, {{0, 0, same}, {0, 1, diff}, {1, 0, diff}, {1, 1, same}}});
      post.cells.push_back({{x, y}, c, 0.0, 0.0, 1.0});
    }
  }
  post.s_max_abs = 4 * kCorr;
  ScenarioExpectation raw = post;
  raw.conditioning = Conditioning::raw;

  Scenario sc{"m3-demo", std::move(m), {post, raw}, false};
  if (!validate_model(sc.model).empty()) {
    throw ConstructionInvalid("m3-demo: model does not validate");
  }
  if (!(max_abs_s(exact_correlations(sc.model, Conditioning::raw)) > kChshBound)) {
    throw ConstructionInvalid("m3-demo: correlations do not exceed |S| <= 2");
  }
  return sc;
}

Scenario quantum_scenario(const std::array<double, 4>& angles) {
  ExperimentModel m;
  m.variant = Variant::quantum_ref;
  for (std::size_t k = 0; k < 2; ++k) {
    StationSetting a;
    a.label = static_cast<int>(k) + 1;
    a.angle = angles[k];
    StationSetting b;
    b.label = static_cast<int>(k) + 1;
    b.angle = angles[2 + k];
    m.station_a.settings.push_back(a);
    m.station_b.settings.push_back(b);
  }
  ScenarioExpectation post;
  post.conditioning = Conditioning::postselected;
  std::array<double, 4> e{};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      e[2 * i + j] = quantum_reference_correlation(angles[i], angles[2 + j]);
      post.cells.push_back(
          {{static_cast<int>(i) + 1, static_cast<int>(j) + 1}, e[2 * i + j], 0.0, 0.0, 1.0});
    }
  }
  post.s_max_abs = chsh_from_correlators(e).s_max_abs;
  ScenarioExpectation raw = post;
  raw.conditioning = Conditioning::raw;
  return {"quantum", std::move(m), {post, raw}, true};
}

std::vector<ScenarioInfo> list_scenarios() {
  return {
      {"lf", "dice counterexample: a = x^L, b = y^(L+1), L uniform on 1..6"},
      {"lhvm-socks", "shared two-valued lambda with P(same) = p_same; obeys |S| <= 2"},
      {"m2-demo", "detector post-selection: raw |S| <= 2, post-selected |S| = 31/14, signalling"},
      {"m3-demo", "correlated instrument variables: |S| = 3 with setting-independent marginals"},
      {"quantum", "ideal polarization correlations cos 2(theta_a - theta_b)"},
  };
}

std::optional<Scenario> scenario_by_name(const std::string& name, const ScenarioParams& params) {
  if (name == "lf") return lf_scenario();
  if (name == "lhvm-socks") return lhvm_socks_scenario(params.p_same, params.flip_second_setting);
  if (name == "m2-demo") return m2_demo_scenario();
  if (name == "m3-demo") return m3_demo_scenario();
  if (name == "quantum") return quantum_scenario(params.angles);
  return std::nullopt;
}

}  // namespace bellsim
