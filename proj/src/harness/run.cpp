#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "matd3/harness/run.hpp"
#include "matd3/harness/stats.hpp"
#include "matd3/marl/bundle_io.hpp"

namespace matd3::harness {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_manifest(const fs::path& path, const ExperimentConfig& config, std::uint64_t seed,
                    const std::vector<marl::AgentBundle>& bundles) {
  nlohmann::json manifest;
  manifest["scenario"] = config.scenario;
  manifest["algorithm"] = config.algorithm;
  manifest["seed"] = seed;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  manifest["config_hash"] = hash;
  manifest["critic_input_layout"] = "observations in agent order, then flat actions [move, comm]";
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    nlohmann::json a;
    a["index"] = i;
    a["file"] = "agent_" + std::to_string(i) + ".bin";
    a["obs_dim"] = bundles[i].obs_dim;
    a["move_dim"] = bundles[i].action_spec.move_dim;
    a["comm_dim"] = bundles[i].action_spec.comm_dim;
    a["critic_input_dim"] = bundles[i].critic_input_dim;
    agents.push_back(a);
  }
  manifest["agents"] = agents;
  nlohmann::json hp;
  hp["gamma"] = config.hp.gamma;
  hp["tau"] = config.hp.tau;
  hp["policy_delay"] = config.hp.policy_delay;
  hp["smoothing_sigma"] = config.hp.smoothing_sigma;
  hp["smoothing_clip"] = config.hp.smoothing_clip;
  hp["lr"] = config.hp.lr;
  hp["batch_size"] = config.hp.batch_size;
  hp["buffer_capacity"] = config.hp.buffer_capacity;
  hp["exploration_noise"] = config.hp.exploration_noise;
  hp["episodes"] = config.hp.episodes;
  hp["steps_per_episode"] = config.hp.steps_per_episode;
  hp["gumbel_temperature"] = config.hp.gumbel_temperature;
  hp["hidden_units"] = config.hp.hidden_units;
  hp["policy_output"] = config.hp.sigmoid_policy ? "sigmoid" : "identity";
  manifest["hyperparams"] = hp;

  std::ofstream os(path);
  if (!os) throw Error("cannot write manifest " + path.string());
  os << manifest.dump(2) << "\n";
}

SeedResult run_one_seed(const ExperimentConfig& config, std::uint64_t seed,
                        const fs::path& seed_dir) {
  SeedResult result;
  result.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fs::create_directories(seed_dir);
    const auto scenario = env::ScenarioRegistry::instance().create(config.scenario);
    const marl::Algorithm algorithm = marl::algorithm_from_string(config.algorithm);

    marl::TrainOptions options;
    options.probe_enabled = config.probe_enabled;
    options.eval_cadence = config.eval_cadence;
    options.probe_pairs = config.probe.pairs_per_eval;
    options.probe_rollouts = config.probe.n_rollouts;
    options.probe_rollout_len = config.probe.rollout_len;

    marl::TrainResult train_result = marl::train(*scenario, algorithm, config.hp, seed, options);

    const std::string header = output_header(config);
    {
      std::ofstream os(seed_dir / "metrics.csv");
      if (!os) throw Error("cannot write " + (seed_dir / "metrics.csv").string());
      marl::write_metrics_csv(os, train_result.metrics, header);
    }
    if (config.probe_enabled) {
      std::ofstream os(seed_dir / "bias.csv");
      if (!os) throw Error("cannot write " + (seed_dir / "bias.csv").string());
      marl::write_bias_csv(os, train_result.bias, header);
    }
    const fs::path ckpt_dir = seed_dir / "checkpoint";
    fs::create_directories(ckpt_dir);
    for (std::size_t i = 0; i < train_result.bundles.size(); ++i) {
      std::ofstream os(ckpt_dir / ("agent_" + std::to_string(i) + ".bin"), std::ios::binary);
      if (!os) throw Error("cannot write checkpoint for agent " + std::to_string(i));
      marl::save_bundle(os, train_result.bundles[i]);
    }
    write_manifest(ckpt_dir / "manifest.json", config, seed, train_result.bundles);

    // Per-episode team mean reward.
    const int n_agents = static_cast<int>(train_result.bundles.size());
    result.reward_curve.assign(config.hp.episodes, 0.0);
    for (const marl::MetricsRow& row : train_result.metrics)
      result.reward_curve[row.episode - 1] += row.episodic_reward / n_agents;
    result.bias_rows = std::move(train_result.bias);

    const int window = std::min(1000, config.hp.episodes);
    const auto smoothed = windowed_mean(result.reward_curve, window);
    result.final_reward = smoothed.back();
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

std::vector<double> windowed_mean(const std::vector<double>& series, int window) {
  if (window < 1) throw Error("windowed_mean: window must be >= 1");
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= static_cast<std::size_t>(window)) acc -= series[i - window];
    const double denom = std::min<std::size_t>(i + 1, window);
    out[i] = acc / static_cast<double>(denom);
  }
  return out;
}

std::filesystem::path resolve_output_dir(const std::string& output_dir) {
  fs::path p(output_dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("MATD3_OUTPUT_ROOT"); root != nullptr && *root != '\0')
    return fs::path(root) / p;
  return p;
}

RunSummary run(const ExperimentConfig& config, int jobs) {
  config.validate();
  RunSummary summary;
  summary.config = config;
  summary.seeds.resize(config.seeds.size());

  const fs::path out_dir = resolve_output_dir(config.output_dir);
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir / "config.ini");
    os << serialize_config(config);
  }

  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(config.seeds.size())));

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= config.seeds.size()) break;
      const std::uint64_t seed = config.seeds[k];
      summary.seeds[k] =
          run_one_seed(config, seed, out_dir / ("seed_" + std::to_string(seed)));
    }
  };
  std::vector<std::thread> threads;
  for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::vector<double> finals;
  summary.all_ok = true;
  for (const SeedResult& s : summary.seeds) {
    if (s.ok) finals.push_back(s.final_reward);
    else summary.all_ok = false;
  }
  if (!finals.empty()) {
    summary.mean_final = mean(finals);
    summary.ci95_final = ci95_half_width(finals);
  }

  {
    std::ofstream os(out_dir / "summary.csv");
    write_summary_csv(os, summary);
  }
  {
    std::ofstream os(out_dir / "plot_data.csv");
    emit_plot_data(os, summary);
  }
  return summary;
}

void write_summary_csv(std::ostream& os, const RunSummary& summary) {
  os << output_header(summary.config) << "\n";
  os << "seed,ok,final_reward,wall_seconds,error\n";
  for (const SeedResult& s : summary.seeds) {
    std::string err = s.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << s.seed << ',' << (s.ok ? 1 : 0) << ',' << fmt(s.final_reward) << ','
       << fmt(s.wall_seconds) << ',' << err << "\n";
  }
  os << "aggregate,n=" << summary.seeds.size() << ',' << fmt(summary.mean_final) << ','
     << fmt(summary.ci95_final) << ",\n";
}

void emit_plot_data(std::ostream& os, const RunSummary& summary) {
  os << output_header(summary.config) << "\n";
  os << "series,x,mean,ci_lo,ci_hi\n";

  const auto emit_row = [&](const std::string& series, long x, const std::vector<double>& vals) {
    if (vals.empty()) return;
    const double m = mean(vals);
    const double hw = vals.size() >= 2 ? ci95_half_width(vals) : 0.0;
    os << series << ',' << x << ',' << fmt(m) << ',' << fmt(m - hw) << ',' << fmt(m + hw) << "\n";
  };

  // Windowed reward curve across seeds.
  const int episodes = summary.config.hp.episodes;
  const int window = std::min(1000, episodes);
  std::vector<std::vector<double>> smoothed;
  for (const SeedResult& s : summary.seeds)
    if (s.ok) smoothed.push_back(windowed_mean(s.reward_curve, window));
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> vals;
    for (const auto& curve : smoothed)
      if (e < static_cast<int>(curve.size())) vals.push_back(curve[e]);
    emit_row("reward_windowed", e + 1, vals);
  }

  // Bias series per agent across seeds, keyed by eval_step.
  if (summary.config.probe_enabled) {
    const auto scenario = env::ScenarioRegistry::instance().create(summary.config.scenario);
    for (int agent = 0; agent < scenario->num_agents(); ++agent) {
      std::map<long, std::vector<double>> by_step;
      for (const SeedResult& s : summary.seeds) {
        if (!s.ok) continue;
        for (const marl::BiasRow& row : s.bias_rows)
          if (row.agent == agent) by_step[row.eval_step].push_back(row.report.bias);
      }
      for (const auto& [step, vals] : by_step)
        emit_row("bias/agent" + std::to_string(agent), step, vals);
    }
  }
}

Eigen::MatrixXd normalize_scores(const Eigen::MatrixXd& rewards,
                                 std::vector<std::string>* warnings) {
  Eigen::MatrixXd out(rewards.rows(), rewards.cols());
  for (Eigen::Index c = 0; c < rewards.cols(); ++c) {
    const double lo = rewards.col(c).minCoeff();
    const double hi = rewards.col(c).maxCoeff();
    if (hi - lo <= 0.0) {
      out.col(c).setConstant(0.5);
      if (warnings)
        warnings->push_back("normalize_scores: column " + std::to_string(c) +
                            " is constant; emitting 0.5");
      continue;
    }
    out.col(c) = (rewards.col(c).array() - lo) / (hi - lo);
  }
  return out;
}

std::vector<GridAxis> parse_axes_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("axes: cannot open '" + path + "'");
  std::vector<GridAxis> axes;
  std::string line;
  bool in_section = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line != "[axes]")
        throw ConfigError("axes line " + std::to_string(lineno) + ": only [axes] is allowed");
      in_section = true;
      continue;
    }
    if (!in_section)
      throw ConfigError("axes line " + std::to_string(lineno) + ": key outside [axes]");
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("axes line " + std::to_string(lineno) + ": expected key = v1,v2,...");
    GridAxis axis;
    axis.name = line.substr(0, eq);
    axis.name.erase(axis.name.find_last_not_of(" \t") + 1);
    std::stringstream ss(line.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      if (b == std::string::npos) continue;
      const auto e = tok.find_last_not_of(" \t");
      axis.values.push_back(tok.substr(b, e - b + 1));
    }
    if (axis.values.empty())
      throw ConfigError("axes line " + std::to_string(lineno) + ": axis '" + axis.name +
                        "' has no values");
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw ConfigError("axes: no axes defined");
  return axes;
}

std::vector<GridCell> grid_search(const ExperimentConfig& base, const std::vector<GridAxis>& axes,
                                  int jobs) {
  base.validate();
  // Validate every axis before any run starts.
  for (const GridAxis& axis : axes) {
    marl::HyperParams scratch = base.hp;
    for (const std::string& v : axis.values) apply_hyperparam(scratch, axis.name, v);
  }

  std::vector<GridCell> cells;
  std::vector<std::size_t> counter(axes.size(), 0);
  while (true) {
    GridCell cell;
    ExperimentConfig config = base;
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::string& value = axes[a].values[counter[a]];
      apply_hyperparam(config.hp, axes[a].name, value);
      cell.assignment[axes[a].name] = value;
      if (!label.empty()) label += "_";
      label += axes[a].name + "=" + value;
    }
    config.output_dir = base.output_dir + "/grid/" + label;
    cell.summary = run(config, jobs);
    cells.push_back(std::move(cell));

    std::size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++counter[a] < axes[a].values.size()) break;
      counter[a] = 0;
    }
    if (a == axes.size()) break;
  }

  std::stable_sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
    const double ma = a.summary.mean_final;
    const double mb = b.summary.mean_final;
    if (std::isnan(ma)) return false;
    if (std::isnan(mb)) return true;
    return ma > mb;
  });

  const fs::path out_dir = resolve_output_dir(base.output_dir);
  fs::create_directories(out_dir);
  std::ofstream os(out_dir / "grid.csv");
  os << output_header(base) << "\n";
  os << "rank";
  for (const GridAxis& axis : axes) os << ',' << axis.name;
  os << ",mean_final_reward,ci95_half_width,seeds_ok\n";
  for (std::size_t r = 0; r < cells.size(); ++r) {
    os << r + 1;
    for (const GridAxis& axis : axes) os << ',' << cells[r].assignment.at(axis.name);
    int ok = 0;
    for (const SeedResult& s : cells[r].summary.seeds) ok += s.ok ? 1 : 0;
    os << ',' << fmt(cells[r].summary.mean_final) << ',' << fmt(cells[r].summary.ci95_final)
       << ',' << ok << "\n";
  }
  return cells;
}

}  // namespace matd3::harness
