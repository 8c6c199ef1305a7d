#include "firefly/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "firefly/experiment.hpp"

namespace firefly {

namespace {

int parse_int(const std::string& s) {
  int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw std::invalid_argument("not an integer: '" + s + "'");
  }
  return v;
}

struct PlanFlags {
  std::string fairness = "f1";
  std::string safe_mode = "distributed";
  std::string post_goal = "continue";
  int replan_every = 1;
  std::optional<double> eta;
  std::uint64_t seed = 0;
};

void add_plan_flags(CLI::App* cmd, PlanFlags& f) {
  cmd->add_option("--fairness", f.fairness, "f1, f2, f3, f4 or none")->capture_default_str();
  cmd->add_option("--safe-mode", f.safe_mode, "central or distributed")->capture_default_str();
  cmd->add_option("--post-goal", f.post_goal, "continue or hold")->capture_default_str();
  cmd->add_option("--replan-every", f.replan_every, "re-plan period in steps")
      ->capture_default_str();
  cmd->add_option("--eta", f.eta, "planner convergence tolerance override");
  cmd->add_option("--seed", f.seed, "recorded with the run")->capture_default_str();
}

RunConfig run_config(const PlanFlags& f, FairnessKind kind) {
  RunConfig cfg = default_run_config(kind, safety_mode_from_string(f.safe_mode));
  cfg.replan_every = f.replan_every;
  cfg.seed = f.seed;
  cfg.post_goal = post_goal_from_string(f.post_goal);
  if (f.eta) cfg.planner.convergence_tol = *f.eta;
  cfg.validate();
  return cfg;
}

void write_to(const std::filesystem::path& path, const auto& writer) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  writer(os);
  if (!os) throw IoError("write failed: " + path.string());
}

void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<SafetyMode> parse_modes(const std::string& s) {
  if (s == "both") return {SafetyMode::Central, SafetyMode::Distributed};
  return {safety_mode_from_string(s)};
}

std::vector<FairnessKind> parse_notions(const std::string& s) {
  std::vector<FairnessKind> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos
                                                                       : comma - start);
    out.push_back(fairness_kind_from_string(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty list");
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int lo = parse_int(text.substr(0, dots));
    const int hi = parse_int(text.substr(dots + 2));
    if (lo > hi) throw std::invalid_argument("empty range '" + text + "'");
    std::vector<int> out;
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::vector<int> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    out.push_back(parse_int(text.substr(start, comma == std::string::npos ? std::string::npos
                                                                          : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fair receding-horizon planning with CLF-CBF safety filtering"};
  app.require_subcommand(1);

  // gen
  std::string gen_kind = "exp1";
  std::uint64_t gen_seed = 0;
  int gen_robots = -1, gen_obstacles = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "write a random scenario file");
  gen->add_option("--kind", gen_kind, "exp1 (obstacle sweep) or exp2 (team sweep)")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--robots", gen_robots, "default 5 for exp1, 7 for exp2");
  gen->add_option("--obstacles", gen_obstacles)->capture_default_str();
  gen->add_option("--out", gen_out, "scenario path")->required();

  // run
  PlanFlags run_flags;
  std::string run_scenario, run_out;
  auto* run_cmd = app.add_subcommand("run", "run one configuration on one scenario");
  run_cmd->add_option("--scenario", run_scenario)->required();
  run_cmd->add_option("--out-dir", run_out, "writes runs/<name>.csv and runs/<name>.txt");
  add_plan_flags(run_cmd, run_flags);

  // compare
  PlanFlags cmp_flags;
  std::string cmp_scenario;
  auto* cmp = app.add_subcommand("compare", "firefly against the baseline on one scenario");
  cmp->add_option("--scenario", cmp_scenario)->required();
  add_plan_flags(cmp, cmp_flags);

  // exp1 / exp2
  struct SweepFlags {
    int trials = 20;
    std::uint64_t seed = 0;
    std::string groups;
    std::string modes;
    std::string fairness = "f1,f2,f3,f4";
    int replan_every = 1;
    std::optional<double> eta;
    double eta_scale = 1.0;
    int threads = 0;
    std::string out_dir = "firefly_out";
  };
  SweepFlags e1, e2;
  e1.groups = "1..5";
  e1.modes = "both";
  e2.groups = "7,10,12,15";
  e2.modes = "distributed";
  auto add_sweep = [&](CLI::App* cmd, SweepFlags& f, const char* group_flag) {
    cmd->add_option("--trials", f.trials)->capture_default_str();
    cmd->add_option("--seed", f.seed)->capture_default_str();
    cmd->add_option(group_flag, f.groups, "list such as 1..5 or 7,10")->capture_default_str();
    cmd->add_option("--safe-mode", f.modes, "central, distributed or both")->capture_default_str();
    cmd->add_option("--fairness", f.fairness, "comma-separated notions")->capture_default_str();
    cmd->add_option("--replan-every", f.replan_every)->capture_default_str();
    cmd->add_option("--eta", f.eta, "absolute planner tolerance for every notion");
    cmd->add_option("--eta-scale", f.eta_scale, "divide each notion's default eta by this")
        ->capture_default_str();
    cmd->add_option("--threads", f.threads, "worker cap, default FIREFLY_THREADS");
    cmd->add_option("--out-dir", f.out_dir)->capture_default_str();
  };
  auto* exp1 = app.add_subcommand("exp1", "obstacle sweep with N = 5");
  add_sweep(exp1, e1, "--obstacles");
  auto* exp2 = app.add_subcommand("exp2", "team-size sweep around one obstacle");
  add_sweep(exp2, e2, "--sizes");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      ScenarioSeed seed;
      seed.rng_seed = gen_seed;
      seed.n_obstacles = gen_obstacles;
      if (gen_kind == "exp1") {
        seed.kind = ExperimentKind::ObstacleSweep;
        seed.n_robots = gen_robots > 0 ? gen_robots : 5;
      } else if (gen_kind == "exp2") {
        seed.kind = ExperimentKind::TeamSweep;
        seed.n_robots = gen_robots > 0 ? gen_robots : 7;
      } else {
        throw std::invalid_argument("unknown scenario kind '" + gen_kind + "'");
      }
      save(generate(seed), gen_out);
      out << "wrote " << gen_out << '\n';
      return kExitOk;
    }

    if (run_cmd->parsed()) {
      const MissionSpec spec = load(run_scenario);
      const bool baseline = run_flags.fairness == "none";
      const RunConfig cfg = run_config(
          run_flags, baseline ? FairnessKind::F1 : fairness_kind_from_string(run_flags.fairness));
      const RunRecord rec = baseline ? run_baseline(spec, cfg) : run(spec, cfg);
      write_run_summary(rec, spec, cfg, out);
      if (!run_out.empty()) {
        const std::filesystem::path dir = std::filesystem::path(run_out) / "runs";
        make_dirs(dir);
        const std::string name = std::filesystem::path(run_scenario).stem().string() + "_" +
                                 run_flags.fairness + "_" + run_flags.safe_mode;
        write_to(dir / (name + ".csv"), [&](std::ostream& os) { write_run_csv(rec, os); });
        write_to(dir / (name + ".txt"),
                 [&](std::ostream& os) { write_run_summary(rec, spec, cfg, os); });
      }
      return kExitOk;
    }

    if (cmp->parsed()) {
      if (cmp_flags.fairness == "none") throw std::invalid_argument("compare needs a notion");
      const MissionSpec spec = load(cmp_scenario);
      const RunConfig cfg = run_config(cmp_flags, fairness_kind_from_string(cmp_flags.fairness));
      const RunRecord ff = run(spec, cfg);
      const RunRecord base =
          run_baseline(spec, default_run_config(FairnessKind::F1, SafetyMode::Central));
      out << "notion: " << cmp_flags.fairness << '\n';
      out << "safe_mode: " << cmp_flags.safe_mode << '\n';
      out << "firefly_reached: " << ff.reached_count() << '/' << ff.robots << '\n';
      out << "baseline_reached: " << base.reached_count() << '/' << base.robots << '\n';
      if (ff.solo_energies.empty()) {
        out << "fairness undefined: a robot starts inside its goal\n";
        out << "improved: false\n";
        return kExitOk;
      }
      const SoloBaseline solo{ff.solo_energies};
      out << "f_firefly: " << evaluate(cfg.notion, ff.executed_plan(), solo) << '\n';
      out << "f_baseline: " << evaluate(cfg.notion, base.executed_plan(), solo) << '\n';
      out << "improved: " << (fairness_improvement(ff, base, cfg.notion, solo) ? "true" : "false")
          << '\n';
      return kExitOk;
    }

    const bool first = exp1->parsed();
    const SweepFlags& f = first ? e1 : e2;
    SweepOptions o = first ? experiment1_defaults() : experiment2_defaults();
    o.trials = f.trials;
    o.seed = f.seed;
    o.groups = parse_int_list(f.groups);
    o.modes = parse_modes(f.modes);
    o.notions = parse_notions(f.fairness);
    o.replan_every = f.replan_every;
    o.eta = f.eta;
    o.eta_scale = f.eta_scale;
    o.threads = f.threads;
    o.out_dir = f.out_dir;
    for (int g : o.groups) {
      if (first ? (g < 0) : (g < 2)) {
        throw std::invalid_argument("invalid " + std::string(first ? "obstacle count" : "team size") +
                                    " " + std::to_string(g));
      }
    }
    o.validate();
    const ExperimentSummary s = first ? run_experiment1(o) : run_experiment2(o);
    write_summary_text(s, out);
    out << "summary: " << (o.out_dir / "summary.csv").string() << '\n';
    return kExitOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace firefly
