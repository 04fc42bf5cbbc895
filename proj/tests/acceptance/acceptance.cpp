// Acceptance suite: one PASS/FAIL line per criterion, each under its runtime
// budget. Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bellsim/coupling.hpp"
#include "bellsim/estimators.hpp"
#include "bellsim/montecarlo.hpp"
#include "bellsim/reports.hpp"
#include "bellsim/rng.hpp"
#include "bellsim/scenarios.hpp"
#include "bellsim/streams.hpp"

using namespace bellsim;

namespace {


// Collects failures; the first few are reported.
struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (notes.size() < 3) notes.push_back(what);
  }
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<std::string(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::string summary;
  try {
    summary = body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(dt < budget_s, "runtime " + std::to_string(dt) + " s exceeds " + std::to_string(budget_s) + " s");
  if (!c.ok) ++failures;
  std::printf("[%s] %d %s (%.3f s / %.0f s)%s%s\n", c.ok ? "PASS" : "FAIL", id, name.c_str(), dt, budget_s,
              summary.empty() ? "" : ": ", summary.c_str());
  for (const auto& n : c.notes) std::printf("       %s\n", n.c_str());
  std::fflush(stdout);
}

bool within_se(double estimate, double exact, double se) { return std::abs(estimate - exact) <= 5.0 * se + 1e-12; }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Marginals uniform in [-r, r] for a random scale r; each correlator uniform
// over its pairwise-valid interval.
JointSpec random_spec(Rng& rng) {
  constexpr double scales[] = {0.0, 0.1, 0.3, 1.0};
  const double r = scales[rng.below(4)];
  std::array<double, 4> m{};
  for (auto& v : m) v = r * (2 * rng.uniform() - 1);
  JointSpec s;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double lo = std::abs(m[i] + m[2 + j]) - 1;
      const double hi = 1 - std::abs(m[i] - m[2 + j]);
      s.e_ab[i][j] = lo + (hi - lo) * rng.uniform();
      s.e_a[i][j] = m[i];
      s.e_b[i][j] = m[2 + j];
    }
  }
  return s;
}

// LHVM with at most 12 source atoms in total, independent instrument laws and
// +-1 responses that read only local variables.
ExperimentModel random_lhvm(Rng& rng) {
  ExperimentModel m;
  m.variant = Variant::lhvm;
  const std::size_t n1 = 1 + rng.below(6), n2 = 1 + rng.below(6);
  for (std::size_t i = 0; i < n1; ++i) m.source.lambda1.push_back("u" + std::to_string(i));
  for (std::size_t i = 0; i < n2; ++i) m.source.lambda2.push_back("v" + std::to_string(i));
  std::vector<double> w(n1 * n2);
  double total = 0;
  for (auto& x : w) total += (x = rng.uniform());
  for (std::size_t k = 0; k < w.size(); ++k) m.source.support.push_back({k / n2, k % n2, w[k] / total});
  auto station = [&](std::size_t rows, const std::string& prefix) {
    Station st;
    for (int label : {1, 2}) {
      const std::size_t k = 1 + rng.below(3);
      StationSetting s;
      s.label = label;
      double t = 0;
      for (std::size_t i = 0; i < k; ++i) {
        s.instrument.atoms.push_back(prefix + std::to_string(i));
        s.instrument.probs.push_back(0.05 + rng.uniform());
        t += s.instrument.probs.back();
      }
      for (auto& p : s.instrument.probs) p /= t;
      s.response = ResponseTable(rows, k);
      for (auto& c : s.response.cells) c = rng.below(2) ? bellsim::Outcome::plus : bellsim::Outcome::minus;
      st.settings.push_back(std::move(s));
    }
    return st;
  };
  m.station_a = station(n1, "i");
  m.station_b = station(n2, "j");
  return m;
}

std::vector<Scenario> shipped() {
  ScenarioParams params;
  params.p_same = 0.8;
  params.flip_second_setting = true;
  std::vector<Scenario> out;
  for (const auto& info : list_scenarios()) out.push_back(*scenario_by_name(info.name, params));
  return out;
}

constexpr std::uint64_t kWindows = 100000;
constexpr std::uint64_t kWidth = 100;

struct PipelineRun {
  std::string csv;
  std::string report;
  CorrelationSet post;
};

PipelineRun pipeline(const Scenario& sc, std::uint64_t seed) {
  const Schedule sched{kWindows * kWidth, kWidth, SettingRule::random, {}};
  const auto g = generate_streams(sc.model, sched, 1.0, seed);
  const auto p = pair_coincidences(g.a, g.b, kWidth);
  const SettingOrder order{sc.model.station_a.labels(), sc.model.station_b.labels()};
  PipelineRun run;
  std::ostringstream csv;
  write_coincidences_csv(p.records, csv);
  run.csv = csv.str();
  run.post = estimate_postselected(p.records, order);
  nlohmann::ordered_json j;
  j["raw"] = to_json(analyze(estimate_raw(p.records, order)));
  j["postselected"] = to_json(analyze(run.post));
  run.report = j.dump(2);
  return run;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");

  criterion(1, "L-F exactness", 1.0, [](Check& c) {
    const auto sc = lf_scenario();
    const std::array<SettingPair, 4> pairs = {{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
    const std::array<double, 4> want = {1, 0, 0, -1};
    for (std::size_t k = 0; k < 4; ++k) {
      const double e = enumerate_postselected(sc.model, pairs[k]).e_ab;
      c.expect(e == want[k], "E at pair " + std::to_string(k) + " = " + num(e));
    }
    const double s = chsh(exact_correlations(sc.model, Conditioning::postselected)).s_max_abs;
    c.expect(s == 2.0, "s_max_abs = " + num(s));
    return "E = (1, 0, 0, -1), s_max_abs = " + num(s);
  });

  criterion(2, "L-F coupling", 1.0, [](Check& c) {
    const auto p = lf_coupling();
    for (std::size_t m = 0; m < 16; ++m) {
      const bool omega = atom_label(m) == "(+1,+1,+1,-1)" || atom_label(m) == "(+1,-1,+1,+1)";
      c.expect(p[m] == (omega ? 0.5 : 0.0), "lf_coupling " + atom_label(m) + " = " + num(p[m]));
    }
    JointSpec spec;
    spec.e_ab = {{{1, 0}, {0, -1}}};
    spec.e_a = {{{1, 1}, {0, 0}}};
    spec.e_b = {{{1, 0}, {1, 0}}};
    const auto r = coupling_feasibility(spec);
    c.expect(r.feasible && r.witness.has_value(), "L-F spec not feasible");
    double worst = 0;
    if (r.witness) {
      const auto& w = *r.witness;
      auto mom = [&](int u, int v) {
        double s = 0;
        for (std::size_t m = 0; m < 16; ++m) s += w[m] * atom_value(m, u) * (v < 0 ? 1 : atom_value(m, v));
        return s;
      };
      for (int i = 0; i < 2; ++i) {
        worst = std::max(worst, std::abs(mom(i, -1) - spec.e_a[i][0]));
        worst = std::max(worst, std::abs(mom(2 + i, -1) - spec.e_b[0][i]));
        for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(mom(i, 2 + j) - spec.e_ab[i][j]));
      }
      c.expect(worst <= 1e-9, "witness moment error " + num(worst));
    }
    return "two atoms at 1/2; witness max moment error " + num(worst);
  });

  criterion(3, "Fine equivalence on random specs", 30.0, [](Check& c) {
    Rng rng = Rng::split(20261016, 0, 0);
    const int n = 20000;
    int feasible = 0, checked = 0;
    for (int t = 0; t < n; ++t) {
      const auto s = random_spec(rng);
      if (!marginal_consistency(s).consistent) continue;
      ++checked;
      const bool lp = coupling_feasibility(s).feasible;
      feasible += lp ? 1 : 0;
      c.expect(lp == chsh_characterization(s), "disagreement on spec " + std::to_string(t));
    }
    c.expect(checked >= 10000, "only " + std::to_string(checked) + " specs checked");
    return std::to_string(checked) + " specs, " + std::to_string(feasible) + " feasible, all agree";
  });

  criterion(4, "LHVM bound and Monte Carlo agreement", 60.0, [](Check& c) {
    Rng rng = Rng::split(4242, 0, 0);
    double worst_s = 0, worst_z = 0;
    for (int t = 0; t < 100; ++t) {
      const auto m = random_lhvm(rng);
      c.expect(validate_model(m).empty(), "model " + std::to_string(t) + " invalid");
      const auto exact = exact_correlations(m, Conditioning::raw);
      const double s = chsh(exact).s_max_abs;
      worst_s = std::max(worst_s, s);
      c.expect(s <= 2.0 + 1e-12, "model " + std::to_string(t) + " s_max_abs = " + num(s));
      const auto est = estimate_from_tallies(tally_all_pairs(m, 100000, 7000 + t), Conditioning::raw,
                                             {m.station_a.labels(), m.station_b.labels()});
      for (std::size_t k = 0; k < 4; ++k) {
        const auto& e = est.cells[k];
        const auto& x = exact.cells[k];
        for (auto [ev, xv, se] : {std::tuple{e.e_ab, x.e_ab, e.se_ab}, std::tuple{e.e_a, x.e_a, e.se_a},
                                  std::tuple{e.e_b, x.e_b, e.se_b}}) {
          c.expect(within_se(ev, xv, se), "model " + std::to_string(t) + " estimate " + num(ev) +
                                              " vs exact " + num(xv) + " (se " + num(se) + ")");
          if (se > 0) worst_z = std::max(worst_z, std::abs(ev - xv) / se);
        }
      }
    }
    return "max exact s_max_abs " + num(worst_s) + ", max |z| " + num(worst_z);
  });

  criterion(5, "post-selection effect in m2-demo", 5.0, [](Check& c) {
    const auto sc = m2_demo_scenario();
    const auto raw = chsh(exact_correlations(sc.model, Conditioning::raw)).s_max_abs;
    const auto post_cs = exact_correlations(sc.model, Conditioning::postselected);
    const auto post = chsh(post_cs).s_max_abs;
    const auto delta = no_signalling(post_cs).max_abs_delta();
    c.expect(raw <= 2.0, "raw s_max_abs = " + num(raw));
    c.expect(post > 2.0, "post-selected s_max_abs = " + num(post));
    c.expect(delta > 0.0, "no nonzero no-signalling delta");
    return "raw " + num(raw) + ", post-selected " + num(post) + ", max |delta| " + num(delta);
  });

  criterion(6, "quantum reference at canonical angles", 10.0, [](Check& c) {
    const auto sc = quantum_scenario();
    const double exact = chsh(exact_correlations(sc.model, Conditioning::postselected)).s_max_abs;
    c.expect(std::abs(exact - 2 * std::sqrt(2.0)) <= 1e-12, "analytic s_max_abs = " + num(exact));
    const auto est = chsh(estimate_from_tallies(tally_all_pairs(sc.model, 100000, 66), Conditioning::postselected,
                                                {sc.model.station_a.labels(), sc.model.station_b.labels()}));
    c.expect(within_se(est.s_max_abs, 2 * std::sqrt(2.0), est.se_s),
             "Monte Carlo S = " + num(est.s_max_abs) + " (se " + num(est.se_s) + ")");
    return "analytic " + num(exact) + ", Monte Carlo " + num(est.s_max_abs) + " +- " + num(est.se_s);
  });

  std::vector<PipelineRun> serial_runs;
  criterion(7, "pipeline round-trip for every shipped scenario", 60.0, [&](Check& c) {
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    std::string names;
    for (const auto& sc : shipped()) {
      auto run = pipeline(sc, 777);
      const auto exact = exact_correlations(sc.model, Conditioning::postselected);
      for (std::size_t k = 0; k < exact.cells.size(); ++k) {
        const auto& e = run.post.cells[k];
        const auto& x = exact.cells[k];
        c.expect(within_se(e.e_ab, x.e_ab, e.se_ab), sc.name + " e_ab " + num(e.e_ab) + " vs " + num(x.e_ab));
        c.expect(within_se(e.e_a, x.e_a, e.se_a), sc.name + " e_a " + num(e.e_a) + " vs " + num(x.e_a));
        c.expect(within_se(e.e_b, x.e_b, e.se_b), sc.name + " e_b " + num(e.e_b) + " vs " + num(x.e_b));
      }
      names += (names.empty() ? "" : ", ") + sc.name;
      serial_runs.push_back(std::move(run));
    }
    return names + " at " + std::to_string(kWindows) + " windows";
  });

  criterion(8, "determinism across thread counts", 60.0, [&](Check& c) {
    int threads = 8;
#ifdef _OPENMP
    threads = std::max(8, omp_get_num_procs());
    omp_set_num_threads(threads);
#endif
    const auto scenarios = shipped();
    c.expect(serial_runs.size() == scenarios.size(), "criterion 7 did not complete");
    for (std::size_t i = 0; i < std::min(serial_runs.size(), scenarios.size()); ++i) {
      const auto run = pipeline(scenarios[i], 777);
      c.expect(run.csv == serial_runs[i].csv, scenarios[i].name + ": coincidence CSV differs");
      c.expect(run.report == serial_runs[i].report, scenarios[i].name + ": report differs");
    }
    return "1 thread vs " + std::to_string(threads) + " threads, byte-identical CSVs and reports";
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
