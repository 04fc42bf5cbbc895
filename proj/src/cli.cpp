#include "bellsim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bellsim/core.hpp"
#include "bellsim/coupling.hpp"
#include "bellsim/errors.hpp"
#include "bellsim/estimators.hpp"
#include "bellsim/format.hpp"
#include "bellsim/model_io.hpp"
#include "bellsim/reports.hpp"
#include "bellsim/scenarios.hpp"
#include "bellsim/streams.hpp"

namespace bellsim {

namespace {

namespace fs = std::filesystem;

// Failure that maps straight to an exit code.
struct CommandError {
  int code;
  std::string message;
};

struct ModelOptions {
  std::string scenario;
  std::string model_file;
  double p_same = 1.0;
  bool flip_second = false;
  std::vector<double> angles;
};

struct SimulateOptions {
  ModelOptions model;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> windows;
  std::optional<std::uint64_t> duration;
  std::uint64_t window_width = 100;
  std::string settings = "random";
  std::vector<int> fixed_pair;
  double detection_rate = 1.0;
  int threads = 0;
  std::string out_dir;
  bool write_streams = false;
};

struct AnalyzeOptions {
  std::vector<std::string> streams;
  std::string coincidences;
  std::string settings_log;
  std::uint64_t window_width = 0;
  std::string out_dir;
};

struct CouplingOptions {
  std::string spec_file;
  std::vector<double> correlators;
  std::vector<double> marginals;
  std::string out_dir;
};

struct ScenarioOptions {
  ModelOptions model;
  std::string export_file;
  std::string out_dir;
};

void add_model_options(CLI::App* app, ModelOptions& m, bool scenario_positional) {
  if (scenario_positional) {
    app->add_option("name", m.scenario, "scenario name (see list-scenarios)")->required();
  } else {
    auto* sc = app->add_option("--scenario", m.scenario, "shipped scenario name");
    auto* mf = app->add_option("--model", m.model_file, "model definition file");
    sc->excludes(mf);
  }
  app->add_option("--p-same", m.p_same, "lhvm-socks: P(lambda1 = lambda2)")
      ->check(CLI::Range(0.0, 1.0));
  app->add_flag("--flip-second", m.flip_second, "lhvm-socks: second setting reports -lambda");
  app->add_option("--angles", m.angles, "quantum: a1,a2,b1,b2 in radians")
      ->delimiter(',')
      ->expected(4);
}

std::string default_out_dir() {
  if (const char* env = std::getenv("BELLSIM_OUT"); env != nullptr && *env != '\0') return env;
  return ".";
}

ExperimentModel resolve_model(const ModelOptions& m, std::string& label) {
  if (!m.model_file.empty()) {
    label = m.model_file;
    try {
      return load_model_file(m.model_file);
    } catch (const ParseError& e) {
      throw CommandError{kExitModel, e.what()};
    } catch (const InvalidModel& e) {
      throw CommandError{kExitModel, e.what()};
    } catch (const Error& e) {
      throw CommandError{kExitConfig, e.what()};
    }
  }
  if (m.scenario.empty()) throw CommandError{kExitConfig, "one of --scenario or --model is required"};
  ScenarioParams params;
  params.p_same = m.p_same;
  params.flip_second_setting = m.flip_second;
  if (!m.angles.empty()) std::copy(m.angles.begin(), m.angles.end(), params.angles.begin());
  auto sc = scenario_by_name(m.scenario, params);
  if (!sc) throw CommandError{kExitConfig, "unknown scenario '" + m.scenario + "'"};
  label = m.scenario;
  return std::move(sc->model);
}

void check_model(const ExperimentModel& model) {
  const auto issues = validate_model(model);
  if (issues.empty()) return;
  std::string msg = "model validation failed:";
  for (const auto& i : issues) msg += "\n  " + i.field + ": " + i.message;
  throw CommandError{kExitModel, msg};
}

fs::path prepare_dir(const std::string& dir) {
  const fs::path p = dir.empty() ? fs::path(default_out_dir()) : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw CommandError{kExitConfig, "cannot create output directory '" + p.string() + "'"};
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CommandError{kExitConfig, "cannot write '" + path.string() + "'"};
  return f;
}

// Gnuplot-ready two-column data plus a caption sidecar.
void write_plot(const fs::path& dir, const std::string& stem, const std::string& caption,
                const std::vector<std::pair<double, double>>& rows) {
  auto data = open_out(dir / (stem + ".dat"));
  for (const auto& [x, y] : rows) data << format_double(x) << ' ' << format_double(y) << '\n';
  auto cap = open_out(dir / (stem + ".caption.txt"));
  cap << caption << '\n';
}

void write_plots(const fs::path& dir, const Analysis& a) {
  const std::string cond(to_string(a.correlations.conditioning));
  std::vector<std::pair<double, double>> corr;
  std::string pairs;
  for (std::size_t i = 0; i < a.correlations.cells.size(); ++i) {
    const auto& c = a.correlations.cells[i];
    corr.emplace_back(static_cast<double>(i), c.e_ab);
    pairs += " " + std::to_string(i) + "=(" + std::to_string(c.sp.x) + "," +
             std::to_string(c.sp.y) + ")";
  }
  write_plot(dir, "correlators_" + cond,
             "E(AB) per setting pair, " + cond + " data; column 1 indexes pairs:" + pairs, corr);
  std::vector<std::pair<double, double>> s;
  std::string names;
  for (std::size_t k = 0; k < 8; ++k) {
    s.emplace_back(static_cast<double>(k), a.chsh.s_values[k]);
    names += " " + std::to_string(k) + "=" + pattern_name(chsh_patterns()[k]);
  }
  write_plot(dir, "chsh_" + cond,
             "CHSH S per sign pattern, " + cond + " data; bound |S| <= 2; patterns:" + names, s);
}

struct AnalysisPair {
  Analysis raw;
  Analysis post;
};

void write_analysis_outputs(const fs::path& dir, const AnalysisPair& ap,
                            nlohmann::ordered_json meta) {
  nlohmann::ordered_json report;
  report["meta"] = std::move(meta);
  report["raw"] = to_json(ap.raw);
  report["postselected"] = to_json(ap.post);
  auto rj = open_out(dir / "report.json");
  rj << report.dump(2) << '\n';
  auto sc = open_out(dir / "summary.csv");
  sc << kSummaryCsvHeader << '\n';
  write_summary_rows(ap.raw.correlations, sc);
  write_summary_rows(ap.post.correlations, sc);
  write_plots(dir, ap.raw);
  write_plots(dir, ap.post);
}

AnalysisPair analyze_records(const std::vector<CoincidenceRecord>& records,
                             const std::optional<SettingOrder>& order) {
  try {
    return {analyze(estimate_raw(records, order)), analyze(estimate_postselected(records, order))};
  } catch (const EmptyCell& e) {
    throw CommandError{kExitEmptyCell, e.what()};
  } catch (const InvalidRecord& e) {
    throw CommandError{kExitParse, e.what()};
  } catch (const MissingPair& e) {
    throw CommandError{kExitEmptyCell, e.what()};
  }
}

SettingRule parse_rule(const std::string& s) {
  if (s == "random") return SettingRule::random;
  if (s == "round-robin") return SettingRule::round_robin;
  if (s == "fixed") return SettingRule::fixed;
  throw CommandError{kExitConfig, "unknown --settings rule '" + s + "'"};
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  if (!o.seed) throw CommandError{kExitConfig, "seed required (--seed)"};
  if (o.window_width == 0) throw CommandError{kExitConfig, "--window-width must be positive"};
  if (o.windows && o.duration) {
    throw CommandError{kExitConfig, "give either --windows or --duration, not both"};
  }
  if (!(o.detection_rate >= 0.0 && o.detection_rate <= 1.0)) {
    throw CommandError{kExitConfig, "--detection-rate must lie in [0, 1]"};
  }
  std::string label;
  const ExperimentModel model = resolve_model(o.model, label);
  check_model(model);

  Schedule sched;
  sched.window_width = o.window_width;
  sched.duration = o.duration ? *o.duration : o.window_width * (o.windows ? *o.windows : 100000);
  sched.rule = parse_rule(o.settings);
  if (sched.rule == SettingRule::fixed) {
    if (o.fixed_pair.size() != 2) throw CommandError{kExitConfig, "--fixed-pair x,y required"};
    sched.fixed_pair = {o.fixed_pair[0], o.fixed_pair[1]};
    if (!model.station_a.index_of(sched.fixed_pair.x) ||
        !model.station_b.index_of(sched.fixed_pair.y)) {
      throw CommandError{kExitConfig, "--fixed-pair is not a setting pair of the model"};
    }
  }
  if (sched.duration < sched.window_width) {
    throw CommandError{kExitConfig, "duration must cover at least one window"};
  }
#ifdef _OPENMP
  if (o.threads > 0) omp_set_num_threads(o.threads);
#endif

  const auto streams = generate_streams(model, sched, o.detection_rate, *o.seed);
  const auto paired =
      pair_coincidences(streams.a, streams.b, sched.window_width, &streams.log);

  const fs::path dir = prepare_dir(o.out_dir);
  if (o.write_streams) {
    auto fa = open_out(dir / "stream_a.tsv");
    write_timetags(streams.a, fa);
    auto fb = open_out(dir / "stream_b.tsv");
    write_timetags(streams.b, fb);
    auto fl = open_out(dir / "settings.tsv");
    write_setting_log(streams.log, fl);
  }
  {
    auto fc = open_out(dir / "coincidences.csv");
    write_coincidences_csv(paired.records, fc);
  }

  SettingOrder order{model.station_a.labels(), model.station_b.labels()};
  const auto ap = analyze_records(paired.records, order);

  nlohmann::ordered_json meta;
  meta["command"] = "simulate";
  meta["model"] = label;
  meta["variant"] = std::string(to_string(model.variant));
  meta["seed"] = *o.seed;
  meta["windows"] = sched.window_count();
  meta["window_width_ns"] = sched.window_width;
  meta["settings_rule"] = o.settings;
  meta["detection_rate"] = o.detection_rate;
  meta["records"] = paired.records.size();
  meta["dropped_a"] = paired.dropped_a;
  meta["dropped_b"] = paired.dropped_b;
  write_analysis_outputs(dir, ap, meta);

  out << "simulate " << label << " (" << to_string(model.variant) << "), seed " << *o.seed << ", "
      << sched.window_count() << " windows of " << sched.window_width << " ns, "
      << paired.records.size() << " records\n";
  out << summary_text(ap.raw) << summary_text(ap.post);
  out << "outputs written to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_analyze(const AnalyzeOptions& o, std::ostream& out) {
  const bool have_streams = !o.streams.empty();
  const bool have_csv = !o.coincidences.empty();
  if (have_streams == have_csv) {
    throw CommandError{kExitConfig, "give either --streams A B or --coincidences FILE"};
  }
  std::vector<CoincidenceRecord> records;
  nlohmann::ordered_json meta;
  meta["command"] = "analyze";
  try {
    if (have_streams) {
      if (o.streams.size() != 2) throw CommandError{kExitConfig, "--streams takes two files"};
      if (o.window_width == 0) throw CommandError{kExitConfig, "--window-width is required"};
      const auto sa = ingest_timetag_file(o.streams[0], StationId::a);
      const auto sb = ingest_timetag_file(o.streams[1], StationId::b);
      std::optional<SettingLog> log;
      if (!o.settings_log.empty()) {
        std::ifstream in(o.settings_log, std::ios::binary);
        if (!in) throw CommandError{kExitConfig, "cannot open '" + o.settings_log + "'"};
        log = read_setting_log(in, o.window_width, o.settings_log);
      }
      const auto paired = pair_coincidences(sa, sb, o.window_width, log ? &*log : nullptr);
      records = paired.records;
      meta["streams"] = o.streams;
      meta["window_width_ns"] = o.window_width;
      meta["dropped_a"] = paired.dropped_a;
      meta["dropped_b"] = paired.dropped_b;
    } else {
      std::ifstream in(o.coincidences, std::ios::binary);
      if (!in) throw CommandError{kExitConfig, "cannot open '" + o.coincidences + "'"};
      records = read_coincidences_csv(in, o.coincidences);
      meta["coincidences"] = o.coincidences;
    }
  } catch (const ParseError& e) {
    throw CommandError{kExitParse, e.what()};
  } catch (const NonMonotonicTimestamps& e) {
    throw CommandError{kExitParse, e.what()};
  } catch (const UnsortedStream& e) {
    throw CommandError{kExitParse, e.what()};
  } catch (const SettingConflict& e) {
    throw CommandError{kExitParse, e.what()};
  } catch (const Error& e) {
    throw CommandError{kExitConfig, e.what()};
  }
  meta["records"] = records.size();

  // Paired records are kept even when estimation fails on an empty cell.
  const fs::path dir = prepare_dir(o.out_dir);
  if (have_streams) {
    auto fc = open_out(dir / "coincidences.csv");
    write_coincidences_csv(records, fc);
  }
  const auto ap = analyze_records(records, std::nullopt);
  write_analysis_outputs(dir, ap, meta);
  out << "analyze: " << records.size() << " records";
  if (ap.post.correlations.unassigned > 0) {
    out << " (" << ap.post.correlations.unassigned << " with an unknown setting)";
  }
  out << '\n' << summary_text(ap.raw) << summary_text(ap.post);
  out << "outputs written to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_check_coupling(const CouplingOptions& o, std::ostream& out) {
  JointSpec spec;
  if (!o.spec_file.empty()) {
    if (!o.correlators.empty()) {
      throw CommandError{kExitConfig, "give either --spec or --correlators, not both"};
    }
    std::ifstream in(o.spec_file, std::ios::binary);
    if (!in) throw CommandError{kExitConfig, "cannot open '" + o.spec_file + "'"};
    try {
      spec = read_joint_spec(in, o.spec_file);
    } catch (const ParseError& e) {
      throw CommandError{kExitParse, e.what()};
    }
  } else {
    if (o.correlators.size() != 4) {
      throw CommandError{kExitConfig, "--spec FILE or --correlators e11,e12,e21,e22 required"};
    }
    if (!o.marginals.empty() && o.marginals.size() != 4) {
      throw CommandError{kExitConfig, "--marginals takes a1,a2,b1,b2"};
    }
    spec.settings_a = {1, 2};
    spec.settings_b = {1, 2};
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        spec.e_ab[i][j] = o.correlators[2 * i + j];
        spec.e_a[i][j] = o.marginals.empty() ? 0.0 : o.marginals[i];
        spec.e_b[i][j] = o.marginals.empty() ? 0.0 : o.marginals[2 + j];
      }
    }
  }

  const auto result = coupling_feasibility(spec);
  if (result.feasible) {
    out << "feasible: a joint distribution of (A" << spec.settings_a[0] << ", A"
        << spec.settings_a[1] << ", B" << spec.settings_b[0] << ", B" << spec.settings_b[1]
        << ") reproduces all moments (max residual " << format_double(result.max_residual)
        << ")\n";
    for (std::size_t m = 0; m < 16; ++m) {
      const double p = (*result.witness)[m];
      if (p > 0.0) out << "  p" << atom_label(m) << " = " << format_double(p) << '\n';
    }
  } else {
    out << "infeasible: " << result.certificate->constraint << " (value "
        << format_double(result.certificate->value) << ")\n";
  }
  if (!o.out_dir.empty()) {
    const fs::path dir = prepare_dir(o.out_dir);
    auto fj = open_out(dir / "coupling.json");
    fj << to_json(result, spec).dump(2) << '\n';
    if (result.witness) {
      auto fw = open_out(dir / "witness.txt");
      write_witness(*result.witness, spec, fw);
    }
  }
  return kExitOk;
}

int cmd_scenario(const ScenarioOptions& o, std::ostream& out) {
  std::string label;
  ExperimentModel model;
  try {
    model = resolve_model(o.model, label);
  } catch (const ConstructionInvalid& e) {
    throw CommandError{kExitModel, e.what()};
  }
  out << "scenario " << label << " (" << to_string(model.variant) << ")\n";
  const auto raw = analyze(exact_correlations(model, Conditioning::raw));
  std::optional<Analysis> post;
  try {
    post = analyze(exact_correlations(model, Conditioning::postselected));
  } catch (const DegenerateConditioning& e) {
    out << "post-selected values undefined: " << e.what() << '\n';
  }
  out << summary_text(raw);
  if (post) out << summary_text(*post);
  if (!o.export_file.empty()) {
    save_model_file(model, o.export_file);
    out << "model written to " << o.export_file << '\n';
  }
  if (!o.out_dir.empty()) {
    const fs::path dir = prepare_dir(o.out_dir);
    nlohmann::ordered_json j;
    j["scenario"] = label;
    j["raw"] = to_json(raw);
    j["postselected"] = post ? to_json(*post) : nlohmann::ordered_json(nullptr);
    auto fj = open_out(dir / "expected.json");
    fj << j.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_list(std::ostream& out) {
  for (const auto& s : list_scenarios()) out << s.name << "\t" << s.description << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"bellsim: Bell-test simulation and analysis"};
  app.set_config("--config", "", "read options from an INI/TOML file; flags override it");
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate streams, pair, estimate, report");
  add_model_options(simulate, sim.model, false);
  simulate->add_option("--seed", sim.seed, "master seed (required)");
  auto* win = simulate->add_option("--windows", sim.windows, "number of coincidence windows");
  auto* dur = simulate->add_option("--duration", sim.duration, "run length in ns");
  win->excludes(dur);
  simulate->add_option("--window-width", sim.window_width, "coincidence window W in ns");
  simulate->add_option("--settings", sim.settings, "random | round-robin | fixed");
  simulate->add_option("--fixed-pair", sim.fixed_pair, "x,y for --settings fixed")
      ->delimiter(',')
      ->expected(2);
  simulate->add_option("--detection-rate", sim.detection_rate, "per-station click survival");
  simulate->add_option("--threads", sim.threads, "OpenMP threads (0 = runtime default)");
  simulate->add_option("--out", sim.out_dir, "output directory");
  simulate->add_flag("--write-streams", sim.write_streams, "also write time-tag files");

  AnalyzeOptions ana;
  auto* analyze_cmd = app.add_subcommand("analyze", "analyze time-tag streams or coincidences");
  analyze_cmd->add_option("--streams", ana.streams, "station A and B time-tag files")
      ->expected(2);
  analyze_cmd->add_option("--coincidences", ana.coincidences, "coincidence CSV");
  analyze_cmd->add_option("--settings-log", ana.settings_log, "per-window settings file");
  analyze_cmd->add_option("--window-width", ana.window_width, "coincidence window W in ns");
  analyze_cmd->add_option("--out", ana.out_dir, "output directory");

  CouplingOptions cpl;
  auto* coupling = app.add_subcommand("check-coupling", "decide whether a joint distribution exists");
  coupling->add_option("--spec", cpl.spec_file, "joint spec file");
  coupling->add_option("--correlators", cpl.correlators, "e11,e12,e21,e22")->delimiter(',')->expected(4);
  coupling->add_option("--marginals", cpl.marginals, "a1,a2,b1,b2 (default 0)")->delimiter(',')->expected(4);
  coupling->add_option("--out", cpl.out_dir, "write coupling.json and witness.txt here");

  ScenarioOptions scn;
  auto* scenario = app.add_subcommand("scenario", "print a scenario's exact tables, export its model");
  add_model_options(scenario, scn.model, true);
  scenario->add_option("--export", scn.export_file, "write the model definition file");
  scenario->add_option("--out", scn.out_dir, "write expected.json here");

  auto* list = app.add_subcommand("list-scenarios", "list shipped scenarios");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (analyze_cmd->parsed()) return cmd_analyze(ana, out);
    if (coupling->parsed()) return cmd_check_coupling(cpl, out);
    if (scenario->parsed()) return cmd_scenario(scn, out);
    if (list->parsed()) return cmd_list(out);
  } catch (const CommandError& e) {
    err << "error: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitConfig;
}

}  // namespace bellsim
