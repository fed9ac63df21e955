// Copyright 2026 The ddidd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// The ddidd command line. Kept in a header so tests can run commands
// in-process and check exit codes and outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddidd/ddidd.hpp"

namespace ddidd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Raised for bad invocations that CLI11 cannot see (missing files, bad
/// values inside spec files). Maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline nlohmann::ordered_json to_json(const FilterParams& p) {
  return {{"fq_sample", p.fq_sample},
          {"fq_threshold", p.fq_threshold},
          {"fq_rule_cap", p.fq_rule_cap},
          {"fq_source_fraction", p.fq_source_fraction},
          {"ur_learn", p.ur_learn},
          {"ur_use", p.ur_use},
          {"hc_learn", p.hc_learn},
          {"hc_use", p.hc_use},
          {"wr_learn", p.wr_learn},
          {"wr_refresh", p.wr_refresh},
          {"windows", p.windows},
          {"wr_threshold", p.wr_threshold},
          {"wr_std_floor", p.wr_std_floor},
          {"acceptable_factor", p.acceptable_factor},
          {"holdout_fraction", p.holdout_fraction}};
}

inline nlohmann::ordered_json to_json(const EngineConfig& c) {
  nlohmann::ordered_json j;
  j["peace"] = c.peace_path;
  j["attack"] = c.attack_path;
  j["mode"] = c.mode;
  j["strict_ordering"] = c.strict_ordering;
  j["seed"] = c.seed;
  j["selection_interval"] = c.selection_interval;
  j["attack_sample_size"] = c.attack_sample_size;
  j["detector"] = {{"start_streak", c.detector.start_streak},
                   {"end_streak", c.detector.end_streak},
                   {"end_blocked_fraction", c.detector.end_blocked_fraction}};
  j["params"] = to_json(c.params);
  if (c.event_window) j["event_window"] = {c.event_window->first, c.event_window->second};
  if (c.max_attack_seconds) j["max_attack_seconds"] = *c.max_attack_seconds;
  return j;
}

/// Flags shared by every command that learns or replays.
struct EngineFlags {
  EngineConfig cfg;
  std::optional<std::uint64_t> seed;
  std::vector<std::int64_t> event_window;
  std::optional<std::int64_t> max_attack_seconds;

  void add(CLI::App& app, bool with_attack) {
    auto& p = cfg.params;
    app.add_option("--peace", cfg.peace_path, "Peace-time trace (JSON lines)")->required();
    if (with_attack) app.add_option("--attack", cfg.attack_path, "Trace to replay")->required();
    app.add_option("--seed", seed, "Seed (falls back to DDIDD_SEED, then 1)");
    app.add_option("--l-fq", p.fq_sample, "Queries per FQ sample")->capture_default_str();
    app.add_option("--f-fq", p.fq_threshold, "FQ frequency-increase threshold")->capture_default_str();
    app.add_option("--fq-rule-cap", p.fq_rule_cap, "Max FQ_t rules")->capture_default_str();
    app.add_option("--fq-source-fraction", p.fq_source_fraction, "FQ_s per-source match share")->capture_default_str();
    app.add_option("--l-ur", p.ur_learn, "UR learning period (s)")->capture_default_str();
    app.add_option("--u-ur", p.ur_use, "UR use period (s)")->capture_default_str();
    app.add_option("--l-hc", p.hc_learn, "HC learning period (s)")->capture_default_str();
    app.add_option("--u-hc", p.hc_use, "HC use period (s)")->capture_default_str();
    app.add_option("--l-wr", p.wr_learn, "WR learning period (s)")->capture_default_str();
    app.add_option("--wr-refresh", p.wr_refresh, "WR refresh interval (s)")->capture_default_str();
    app.add_option("--windows", p.windows, "WR window sizes (s)")->delimiter(',')->capture_default_str();
    app.add_option("--t-wr", p.wr_threshold, "WR deviance threshold")->capture_default_str();
    app.add_option("--f-acc", p.acceptable_factor, "Acceptable-load multiplier")->capture_default_str();
    app.add_option("--start-streak", cfg.detector.start_streak, "Seconds over AL that start an attack")
        ->capture_default_str();
    app.add_option("--end-streak", cfg.detector.end_streak, "Calm seconds that end an attack")->capture_default_str();
    if (with_attack) {
      app.add_flag("--strict-ordering", cfg.strict_ordering, "Never deploy HC or WR alone");
      app.add_option("--attack-sample", cfg.attack_sample_size, "Attack sample size for emulation")
          ->capture_default_str();
      app.add_option("--max-attack-seconds", max_attack_seconds, "Stop this many seconds after detection");
      app.add_option("--event-window", event_window, "Measured window BEGIN END (trace seconds)")->expected(2);
    }
  }

  EngineConfig resolve() {
    if (seed) {
      cfg.seed = *seed;
    } else if (const char* env = std::getenv("DDIDD_SEED"); env && *env) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw UsageError("DDIDD_SEED is not an unsigned integer");
      }
    }
    if (event_window.size() == 2) cfg.event_window = std::make_pair(event_window[0], event_window[1]);
    cfg.max_attack_seconds = max_attack_seconds;
    for (const auto* path : {&cfg.peace_path, &cfg.attack_path}) {
      if (!path->empty() && !std::filesystem::exists(*path)) throw UsageError("trace not found: " + *path);
    }
    try {
      cfg.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

inline void log_config(std::ostream& err, const std::string& command, const nlohmann::ordered_json& cfg) {
  err << "ddidd " << command << ": resolved config " << cfg.dump() << '\n';
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path);
}

inline std::string fixed(double v, int prec) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

inline Engine primed_engine(const EngineConfig& cfg) {
  Engine engine(cfg);
  TraceReader peace(cfg.peace_path);
  engine.prime(peace);
  return engine;
}

inline MetricsReport run_engine(Engine& engine, const std::string& attack_path) {
  TraceReader attack(attack_path);
  try {
    return engine.run(attack);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MonotonicityViolation || e.code() == ErrorCode::MalformedLine) {
      throw Error(ErrorCode::TraceError, e.what(), e.line());
    }
    throw;
  }
}

// ---------------------------------------------------------------- commands

inline int cmd_learn(EngineFlags& flags, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  EngineConfig cfg = flags.resolve();
  auto j = to_json(cfg);
  j["out"] = out_dir;
  log_config(err, "learn", j);

  Engine engine = primed_engine(cfg);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  save_allowlist(*engine.allowlist(), (dir / "allowlist.json").string());
  save_ttltable(*engine.ttltable(), (dir / "ttltable.json").string());
  save_ratetable(engine.wr_tracker().table(), (dir / "ratetable.json").string());
  const auto& store = engine.store();
  const double end = static_cast<double>(store.last_tick() + 1);
  const double span = end - static_cast<double>(store.first_tick());
  save_fqbaseline(store.fq_baseline(), TableClock{end, span, span}, (dir / "fqbaseline.json").string());

  nlohmann::ordered_json summary = {{"acceptable_load", engine.acceptable_load()},
                                    {"allowlist_sources", engine.allowlist()->sources.size()},
                                    {"ttltable_sources", engine.ttltable()->entries.size()},
                                    {"ratetable_sources", engine.wr_tracker().table().size()},
                                    {"files",
                                     {(dir / "allowlist.json").string(), (dir / "ttltable.json").string(),
                                      (dir / "ratetable.json").string(), (dir / "fqbaseline.json").string()}}};
  out << summary.dump(1) << '\n';
  return kExitOk;
}

inline int cmd_replay(EngineFlags& flags, const std::string& mode, std::optional<std::string> timeline,
                      const std::optional<std::string>& report_out, const std::optional<std::string>& deployment_out,
                      std::ostream& out, std::ostream& err) {
  flags.cfg.mode = mode;
  EngineConfig cfg = flags.resolve();
  if (!timeline) timeline = cfg.attack_path + "." + mode + ".timeline.csv";
  auto j = to_json(cfg);
  j["timeline"] = *timeline;
  log_config(err, "replay", j);

  Engine engine = primed_engine(cfg);
  MetricsReport report = run_engine(engine, cfg.attack_path);
  write_text(*timeline, timeline_csv(report.timeline));
  if (deployment_out) {
    if (!engine.last_deployment()) err << "ddidd replay: nothing was deployed; writing an empty deployment\n";
    save_deployment(engine.last_deployment().value_or(DeploymentState{}), *deployment_out);
  }
  auto doc = ddidd::to_json(report);
  if (report_out) write_text(*report_out, doc.dump(1) + "\n");
  else out << doc.dump(1) << '\n';
  return kExitOk;
}

inline std::vector<std::string> split_modes(const std::string& text) {
  std::vector<std::string> modes;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) modes.push_back(cur);
  }
  return modes;
}

inline std::string compare_table(const nlohmann::ordered_json& doc) {
  std::ostringstream s;
  s << std::left << std::setw(10) << "mode" << std::right << std::setw(10) << "con%" << std::setw(10) << "cd%"
    << std::setw(10) << "delay_s" << std::setw(14) << "attack_drop%" << "  trajectory\n";
  for (const auto& row : doc.at("rows")) {
    std::string delay = row.at("selection_delay_s").is_null() ? "-" : std::to_string(row.at("selection_delay_s").get<long>());
    s << std::left << std::setw(10) << row.at("mode").get<std::string>() << std::right << std::setw(10)
      << fixed(row.at("controlled_load_pct").get<double>(), 2) << std::setw(10)
      << fixed(row.at("collateral_damage_pct").get<double>(), 3) << std::setw(10) << delay << std::setw(14)
      << fixed(row.at("attack_dropped_pct").get<double>(), 2) << "  " << row.at("trajectory").get<std::string>()
      << '\n';
  }
  return s.str();
}

inline int cmd_compare(EngineFlags& flags, const std::string& modes_text, bool text, std::ostream& out,
                       std::ostream& err) {
  auto modes = split_modes(modes_text);
  if (modes.empty()) throw UsageError("--modes needs at least one mode");
  for (const auto& m : modes) {
    try {
      selector_for_mode(m).validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  EngineConfig cfg = flags.resolve();
  auto j = to_json(cfg);
  j["modes"] = modes;
  j.erase("mode");
  log_config(err, "compare", j);

  // Priming does not depend on the mode, so it runs once.
  Engine primed = primed_engine(cfg);
  nlohmann::ordered_json doc;
  doc["acceptable_load"] = primed.acceptable_load();
  auto& rows = doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& m : modes) {
    Engine engine = primed;
    engine.set_mode(m);
    MetricsReport report = run_engine(engine, cfg.attack_path);
    std::string traj;
    for (const auto& p : trajectory(report)) traj += (traj.empty() ? "" : " > ") + p;
    nlohmann::ordered_json row;
    row["mode"] = m;
    row["controlled_load_pct"] = report.controlled_load_pct;
    row["collateral_damage_pct"] = report.collateral_damage_pct;
    row["selection_delay_s"] = report.selection_delay_s ? nlohmann::ordered_json(*report.selection_delay_s) : nullptr;
    row["attack_dropped_pct"] = report.attack_dropped_pct;
    row["trajectory"] = traj.empty() ? "-" : traj;
    row["report"] = ddidd::to_json(report);
    rows.push_back(std::move(row));
  }
  const std::string table = compare_table(doc);
  if (text) {
    out << table;
  } else {
    out << doc.dump(1) << '\n';
    err << table;
  }
  return kExitOk;
}

struct SynthFlags {
  std::string profile;
  std::string attacks;
  std::string out;
  std::optional<std::string> peace_out;
  std::optional<std::int64_t> split_at;
  std::optional<std::string> manifest;
  std::optional<std::uint64_t> seed;
};

inline nlohmann::json read_spec(const std::string& path) {
  if (!std::filesystem::exists(path)) throw UsageError("file not found: " + path);
  std::ifstream in(path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError(path + ": not valid JSON");
  return j;
}

inline std::uint64_t write_window(const ScenarioGenerator& g, std::int64_t b, std::int64_t e, const std::string& path) {
  TraceWriter w(path);
  auto m = g.mix(b, e);
  QueryRecord r;
  std::uint64_t n = 0;
  while (m.next(r)) {
    w.write(r);
    ++n;
  }
  w.close();
  return n;
}

inline int cmd_synth(const SynthFlags& f, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s.legit = legit_profile_from_json(read_spec(f.profile));
    std::optional<std::uint64_t> seed = f.seed;
    if (!seed) {
      if (const char* env = std::getenv("DDIDD_SEED"); env && *env) seed = std::stoull(env);
    }
    if (seed) s.legit.seed = *seed;
    attacks_from_json(read_spec(f.attacks), s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument&) {
    throw UsageError("DDIDD_SEED is not an unsigned integer");
  }
  if (f.peace_out.has_value() != f.split_at.has_value()) throw UsageError("--peace-out and --split-at go together");
  if (f.split_at && (*f.split_at <= s.begin() || *f.split_at >= s.end())) {
    throw UsageError("--split-at must fall inside the profile's time span");
  }

  nlohmann::ordered_json manifest;
  manifest["profile"] = to_json(s.legit);
  auto& attacks = manifest["attacks"] = nlohmann::ordered_json::array();
  for (const auto& a : s.attacks) attacks.push_back(to_json(a));
  if (s.flash_crowd) manifest["flash_crowd"] = to_json(*s.flash_crowd);
  log_config(err, "synth", manifest);

  ScenarioGenerator g(s);
  manifest["legit_rate_qps"] = g.legit_rate();
  for (std::size_t i = 0; i < g.attacks().size(); ++i) manifest["attacks"][i]["qps"] = g.attacks()[i]->per_second();
  auto& files = manifest["files"] = nlohmann::ordered_json::array();
  std::int64_t attack_begin = s.begin();
  if (f.split_at) {
    auto n = write_window(g, s.begin(), *f.split_at, *f.peace_out);
    files.push_back({{"path", *f.peace_out}, {"begin", s.begin()}, {"end", *f.split_at}, {"records", n}});
    attack_begin = *f.split_at;
  }
  auto n = write_window(g, attack_begin, s.end(), f.out);
  files.push_back({{"path", f.out}, {"begin", attack_begin}, {"end", s.end()}, {"records", n}});

  const std::string manifest_path = f.manifest.value_or(f.out + ".manifest.json");
  write_text(manifest_path, manifest.dump(1) + "\n");
  out << manifest.dump(1) << '\n';
  return kExitOk;
}

inline int cmd_render(const std::string& deployment, const std::string& format, const std::optional<std::string>& out_path,
                      std::ostream& out, std::ostream& err) {
  if (!std::filesystem::exists(deployment)) throw UsageError("deployment file not found: " + deployment);
  log_config(err, "render", {{"deployment", deployment}, {"format", format}, {"out", out_path.value_or("-")}});
  DeploymentState state;
  try {
    state = load_deployment(deployment);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw UsageError(e.what());
    throw;
  }
  std::string text = format == "neutral" ? render_neutral(state)
                     : format == "ipset" ? render_ipset(state)
                                         : render_iptables(state);
  if (out_path) write_text(*out_path, text);
  else out << text;
  return kExitOk;
}

inline void render_report(const nlohmann::json& r, std::ostream& out) {
  auto num = [](const nlohmann::json& v, int prec) { return v.is_null() ? std::string("-") : fixed(v.get<double>(), prec); };
  out << "mode                 " << r.value("mode", "?") << '\n'
      << "acceptable load      " << num(r.at("acceptable_load"), 1) << " qps\n"
      << "measured window      [" << r.at("window").at(0) << ", " << r.at("window").at(1) << ")\n"
      << "controlled load      " << num(r.at("controlled_load_pct"), 2) << " %\n"
      << "collateral damage    " << num(r.at("collateral_damage_pct"), 3) << " %\n"
      << "selection delay      " << (r.at("selection_delay_s").is_null() ? "-" : r.at("selection_delay_s").dump())
      << " s\n"
      << "unprotected legit    " << num(r.at("ulq_pct"), 2) << " %\n"
      << "attack dropped       " << num(r.at("attack_dropped_pct"), 2) << " %\n"
      << "dropped by filter   ";
  for (auto it = r.at("dropped_by").begin(); it != r.at("dropped_by").end(); ++it) {
    out << ' ' << it.key() << '=' << it.value().get<std::uint64_t>();
  }
  out << "\ndeployments\n";
  for (const auto& d : r.at("deployments")) {
    out << "  " << std::setw(8) << d.at("ts").get<std::int64_t>() << "  " << std::left << std::setw(9)
        << d.at("action").get<std::string>() << std::right << ' ' << d.at("pipeline").get<std::string>()
        << "  drop=" << fixed(d.at("drop_estimate").get<double>(), 3)
        << " cd=" << fixed(d.at("cd_estimate").get<double>(), 4) << '\n';
  }
}

inline int cmd_report(const std::string& path, std::ostream& out, std::ostream& err) {
  auto j = read_spec(path);
  log_config(err, "report", {{"report", path}});
  try {
    if (j.contains("rows")) {
      out << compare_table(nlohmann::ordered_json(j));
      return kExitOk;
    }
    render_report(j, out);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": not a metrics report (" + e.what() + ")");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- entry

/// `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ddidd: offline DNS DDoS filter selection and replay"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  EngineFlags learn_flags, replay_flags, compare_flags;
  std::string learn_out;
  auto* learn = app.add_subcommand("learn", "Learn filter tables from a peace trace");
  learn_flags.add(*learn, false);
  learn->add_option("--out", learn_out, "Directory for the table files")->required();

  std::string mode = "ddidd";
  std::optional<std::string> timeline, report_out, deployment_out;
  auto* replay = app.add_subcommand("replay", "Replay an attack trace through the full defense");
  replay_flags.add(*replay, true);
  replay->add_option("--mode", mode, "ddidd, partial, FQ, or a single filter (FQ_t FQ_s UR HC WR AR)")
      ->capture_default_str();
  replay->add_option("--timeline", timeline, "Timeline CSV path (default: beside the attack trace)");
  replay->add_option("--output", report_out, "Write the report JSON here instead of stdout");
  replay->add_option("--deployment-out", deployment_out, "Write the last deployment as JSON for `render`");

  std::string modes = "FQ,UR,HC,WR,ddidd";
  bool text = false;
  auto* compare = app.add_subcommand("compare", "Replay one trace under several modes");
  compare_flags.add(*compare, true);
  compare->add_option("--modes", modes, "Comma-separated modes")->capture_default_str();
  compare->add_flag("--text", text, "Print the aligned table on stdout instead of JSON");

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Generate labeled synthetic traces");
  synth->add_option("--profile", synth_flags.profile, "Legit profile JSON")->required();
  synth->add_option("--attacks", synth_flags.attacks, "Attacks JSON")->required();
  synth->add_option("--out", synth_flags.out, "Output trace")->required();
  synth->add_option("--peace-out", synth_flags.peace_out, "Also write the records before --split-at here");
  synth->add_option("--split-at", synth_flags.split_at, "Second at which --out starts");
  synth->add_option("--manifest", synth_flags.manifest, "Manifest path (default: OUT.manifest.json)");
  synth->add_option("--seed", synth_flags.seed, "Overrides the profile seed (falls back to DDIDD_SEED)");

  std::string deployment, format = "neutral";
  std::optional<std::string> render_out;
  auto* render = app.add_subcommand("render", "Render a deployment as firewall rule text");
  render->add_option("--deployment", deployment, "Deployment JSON from `replay --deployment-out`")->required();
  render->add_option("--format", format, "Output syntax")
      ->check(CLI::IsMember({"neutral", "ipset", "iptables"}))
      ->capture_default_str();
  render->add_option("--out", render_out, "Output file (default: stdout)");

  std::string report_path;
  auto* report = app.add_subcommand("report", "Human-readable view of a replay or compare JSON");
  report->add_option("report", report_path, "Report JSON")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*learn) return cmd_learn(learn_flags, learn_out, out, err);
    if (*replay) return cmd_replay(replay_flags, mode, timeline, report_out, deployment_out, out, err);
    if (*compare) return cmd_compare(compare_flags, modes, text, out, err);
    if (*synth) return cmd_synth(synth_flags, out, err);
    if (*render) return cmd_render(deployment, format, render_out, out, err);
    if (*report) return cmd_report(report_path, out, err);
  } catch (const UsageError& e) {
    err << "ddidd: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "ddidd: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "ddidd: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ddidd::cli
