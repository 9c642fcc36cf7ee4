// Experiment driver: train runs one experiment over its seeds, grid sweeps
// hyperparameter axes, probe audits a checkpoint's value estimates against
// Monte-Carlo returns, report aggregates finished runs.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "matd3/harness/run.hpp"
#include "matd3/harness/stats.hpp"
#include "matd3/marl/bundle_io.hpp"

namespace fs = std::filesystem;
using namespace matd3;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int cmd_train(const std::string& config_path, std::int64_t seed_override,
              const std::string& out_override, int jobs) {
  harness::ExperimentConfig config;
  try {
    config = harness::parse_config_file(config_path);
    if (seed_override >= 0) config.seeds = {static_cast<std::uint64_t>(seed_override)};
    if (!out_override.empty()) config.output_dir = out_override;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const harness::RunSummary summary = harness::run(config, jobs);
    for (const harness::SeedResult& s : summary.seeds) {
      if (s.ok)
        std::cout << "seed " << s.seed << ": final_reward=" << s.final_reward << " ("
                  << s.wall_seconds << "s)\n";
      else
        std::cerr << "seed " << s.seed << " FAILED: " << s.error << "\n";
    }
    std::cout << "mean_final=" << summary.mean_final << " ci95=" << summary.ci95_final
              << " -> " << harness::resolve_output_dir(config.output_dir).string() << "\n";
    return summary.all_ok ? kExitOk : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_grid(const std::string& config_path, const std::string& axes_path, int jobs) {
  harness::ExperimentConfig base;
  std::vector<harness::GridAxis> axes;
  try {
    base = harness::parse_config_file(config_path);
    axes = harness::parse_axes_file(axes_path);
    // Surface axis-name typos before any run starts.
    for (const auto& axis : axes) {
      marl::HyperParams scratch = base.hp;
      for (const auto& v : axis.values) harness::apply_hyperparam(scratch, axis.name, v);
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const auto cells = harness::grid_search(base, axes, jobs);
    bool all_ok = true;
    for (std::size_t r = 0; r < cells.size(); ++r) {
      std::cout << "rank " << r + 1 << ":";
      for (const auto& [k, v] : cells[r].assignment) std::cout << ' ' << k << '=' << v;
      std::cout << " mean_final=" << cells[r].summary.mean_final << "\n";
      all_ok = all_ok && cells[r].summary.all_ok;
    }
    return all_ok ? kExitOk : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

marl::HyperParams hyperparams_from_manifest(const nlohmann::json& hp_json) {
  marl::HyperParams hp;
  hp.gamma = hp_json.at("gamma").get<double>();
  hp.tau = hp_json.at("tau").get<double>();
  hp.policy_delay = hp_json.at("policy_delay").get<int>();
  hp.smoothing_sigma = hp_json.at("smoothing_sigma").get<double>();
  hp.smoothing_clip = hp_json.at("smoothing_clip").get<double>();
  hp.lr = hp_json.at("lr").get<double>();
  hp.batch_size = hp_json.at("batch_size").get<int>();
  hp.buffer_capacity = hp_json.at("buffer_capacity").get<std::size_t>();
  hp.exploration_noise = hp_json.at("exploration_noise").get<double>();
  hp.episodes = hp_json.at("episodes").get<int>();
  hp.steps_per_episode = hp_json.at("steps_per_episode").get<int>();
  hp.gumbel_temperature = hp_json.at("gumbel_temperature").get<double>();
  hp.hidden_units = hp_json.at("hidden_units").get<int>();
  hp.sigmoid_policy = hp_json.at("policy_output").get<std::string>() == "sigmoid";
  return hp;
}

int cmd_probe(const std::string& checkpoint_dir, const std::string& scenario_id, int episodes,
              int pairs, int rollouts, int rollout_len, std::uint64_t seed,
              const std::string& out_path, const std::string& trajectory_path) {
  try {
    const fs::path dir(checkpoint_dir);
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw Error("cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    mf >> manifest;

    const std::string scen_id =
        scenario_id.empty() ? manifest.at("scenario").get<std::string>() : scenario_id;
    const auto scenario = env::ScenarioRegistry::instance().create(scen_id);
    const marl::HyperParams hp = hyperparams_from_manifest(manifest.at("hyperparams"));
    const marl::TeamSpec spec = marl::TeamSpec::from(*scenario);

    std::vector<marl::AgentBundle> bundles;
    for (const auto& agent : manifest.at("agents")) {
      std::ifstream is(dir / agent.at("file").get<std::string>(), std::ios::binary);
      if (!is) throw Error("cannot open checkpoint record " + agent.at("file").get<std::string>());
      bundles.push_back(marl::load_bundle(is));
    }
    if (static_cast<int>(bundles.size()) != scenario->num_agents())
      throw Error("checkpoint agent count does not match scenario");

    // Fresh exploration episodes provide the probed state-action pairs.
    SeededRng rng(seed);
    marl::ReplayBuffer buffer(static_cast<std::size_t>(episodes) * hp.steps_per_episode + 1);
    SeededRng env_rng = rng.fork("env");
    SeededRng explore = rng.fork("explore");
    for (int ep = 0; ep < episodes; ++ep) {
      auto [world, obs] = env::reset(*scenario, env_rng, hp.steps_per_episode);
      while (!world.done()) {
        const auto actions = marl::select_actions(bundles, obs, hp.exploration_noise,
                                                  hp.gumbel_temperature, explore);
        auto outcome =
            env::step(world, *scenario, env::joint_action_from_flat(*scenario, actions));
        marl::Transition tr;
        tr.x = Eigen::VectorXd(spec.full_obs);
        for (int i = 0; i < spec.num_agents(); ++i)
          tr.x.segment(spec.obs_offset[i], spec.obs_size[i]) = obs[i];
        tr.x_next = Eigen::VectorXd::Zero(spec.full_obs);
        tr.actions = actions;
        tr.rewards = outcome.result.rewards;
        tr.world = world;
        buffer.push(std::move(tr));
        world = std::move(outcome.world);
        obs = std::move(outcome.result.observations);
      }
    }

    probe::ProbeCursor cursor;
    SeededRng probe_rng = rng.fork("probe");
    const auto probe_pairs = probe::collect_probe_states(buffer, cursor, pairs, probe_rng);
    const auto reports = probe::bias_report(bundles, probe_pairs, *scenario, spec, hp, 0,
                                            rollouts, rollout_len, probe_rng.fork("rollouts"));

    std::vector<marl::BiasRow> rows;
    for (int i = 0; i < scenario->num_agents(); ++i)
      rows.push_back(marl::BiasRow{0, i, reports[i]});
    std::ostringstream csv;
    marl::write_bias_csv(csv, rows, "");
    if (out_path.empty()) {
      std::cout << csv.str();
    } else {
      std::ofstream os(out_path);
      if (!os) throw Error("cannot write " + out_path);
      os << csv.str();
      std::cout << "bias report -> " << out_path << "\n";
    }

    if (!trajectory_path.empty()) {
      std::ofstream os(trajectory_path);
      if (!os) throw Error("cannot write " + trajectory_path);
      env::TrajectoryWriter writer(os, *scenario);
      SeededRng traj_rng = rng.fork("trajectory");
      auto [world, obs] = env::reset(*scenario, traj_rng, hp.steps_per_episode);
      while (!world.done()) {
        const auto actions = marl::deterministic_actions(bundles, obs, hp.gumbel_temperature);
        const auto joint = env::joint_action_from_flat(*scenario, actions);
        auto outcome = env::step(world, *scenario, joint);
        writer.record(world, joint, outcome.result.rewards);
        world = std::move(outcome.world);
        obs = std::move(outcome.result.observations);
      }
      std::cout << "trajectory -> " << trajectory_path << "\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

struct LoadedRun {
  std::string dir;
  std::string scenario;
  std::string algorithm;
  std::vector<double> finals;  // per successful seed
};

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  try {
    std::vector<LoadedRun> runs;
    for (const std::string& dir : run_dirs) {
      LoadedRun run;
      run.dir = dir;
      const harness::ExperimentConfig config =
          harness::parse_config_file((fs::path(dir) / "config.ini").string());
      run.scenario = config.scenario;
      run.algorithm = config.algorithm;
      std::ifstream is(fs::path(dir) / "summary.csv");
      if (!is) throw Error("missing summary.csv in " + dir);
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("seed,", 0) == 0 ||
            line.rfind("aggregate", 0) == 0)
          continue;
        std::stringstream ss(line);
        std::string seed, ok, final_reward;
        std::getline(ss, seed, ',');
        std::getline(ss, ok, ',');
        std::getline(ss, final_reward, ',');
        if (ok == "1") run.finals.push_back(std::stod(final_reward));
      }
      if (run.finals.empty()) throw Error("no successful seeds recorded in " + dir);
      runs.push_back(std::move(run));
    }

    const fs::path out(out_dir.empty() ? "." : out_dir);
    fs::create_directories(out);
    std::ofstream os(out / "report.csv");
    os << "run,scenario,algorithm,n_seeds,mean_final,ci95_half_width,normalized\n";

    // 0-1 normalization of mean finals within each scenario (one task per
    // column of the score matrix).
    std::map<std::string, std::vector<std::size_t>> by_scenario;
    for (std::size_t i = 0; i < runs.size(); ++i) by_scenario[runs[i].scenario].push_back(i);
    std::vector<double> normalized(runs.size(), 0.5);
    for (const auto& [scenario, idx] : by_scenario) {
      Eigen::MatrixXd scores(static_cast<Eigen::Index>(idx.size()), 1);
      for (std::size_t r = 0; r < idx.size(); ++r)
        scores(static_cast<Eigen::Index>(r), 0) = harness::mean(runs[idx[r]].finals);
      std::vector<std::string> warnings;
      const Eigen::MatrixXd norm = harness::normalize_scores(scores, &warnings);
      for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
      for (std::size_t r = 0; r < idx.size(); ++r)
        normalized[idx[r]] = norm(static_cast<Eigen::Index>(r), 0);
    }

    for (std::size_t i = 0; i < runs.size(); ++i) {
      os << runs[i].dir << ',' << runs[i].scenario << ',' << runs[i].algorithm << ','
         << runs[i].finals.size() << ',' << harness::mean(runs[i].finals) << ','
         << harness::ci95_half_width(runs[i].finals) << ',' << normalized[i] << "\n";
    }
    std::cout << "report -> " << (out / "report.csv").string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matd3lab: multi-agent actor-critic laboratory"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Run one experiment over its seeds");
  std::string train_config;
  std::int64_t seed_override = -1;
  std::string out_override;
  int jobs = 0;
  train->add_option("--config", train_config, "experiment config file")->required();
  train->add_option("--seed-override", seed_override, "run only this seed");
  train->add_option("--out", out_override, "override output_dir");
  train->add_option("--jobs", jobs, "parallel seed workers (0 = auto)");

  auto* grid = app.add_subcommand("grid", "Grid search over hyperparameter axes");
  std::string grid_config, axes_path;
  int grid_jobs = 0;
  grid->add_option("--config", grid_config, "base experiment config")->required();
  grid->add_option("--axes", axes_path, "axes file ([axes] key = v1,v2,...)")->required();
  grid->add_option("--jobs", grid_jobs, "parallel seed workers (0 = auto)");

  auto* probe = app.add_subcommand("probe", "Bias probe of a saved checkpoint");
  std::string ckpt_dir, probe_scenario, probe_out, trajectory_path;
  int probe_episodes = 20, probe_pairs = 100, probe_rollouts = 8, probe_rollout_len = 100;
  std::uint64_t probe_seed = 1;
  probe->add_option("--checkpoint", ckpt_dir, "checkpoint directory (with manifest.json)")
      ->required();
  probe->add_option("--scenario", probe_scenario, "scenario id (default: from manifest)");
  probe->add_option("--episodes", probe_episodes, "exploration episodes to gather states");
  probe->add_option("--pairs", probe_pairs, "probed state-action pairs");
  probe->add_option("--rollouts", probe_rollouts, "Monte-Carlo rollouts per pair");
  probe->add_option("--rollout-len", probe_rollout_len, "steps per rollout");
  probe->add_option("--seed", probe_seed, "probe rng seed");
  probe->add_option("--out", probe_out, "bias CSV path (default: stdout)");
  probe->add_option("--dump-trajectory", trajectory_path,
                    "write one deterministic evaluation episode as CSV");

  auto* report = app.add_subcommand("report", "Aggregate finished runs");
  std::vector<std::string> run_dirs;
  std::string report_out;
  report->add_option("--runs", run_dirs, "run output directories")->required()->expected(-1);
  report->add_option("--out", report_out, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (*train) return cmd_train(train_config, seed_override, out_override, jobs);
  if (*grid) return cmd_grid(grid_config, axes_path, grid_jobs);
  if (*probe)
    return cmd_probe(ckpt_dir, probe_scenario, probe_episodes, probe_pairs, probe_rollouts,
                     probe_rollout_len, probe_seed, probe_out, trajectory_path);
  if (*report) return cmd_report(run_dirs, report_out);
  return kExitConfig;
}
