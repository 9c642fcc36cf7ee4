#include <cstdio>
#include <numeric>

#include "matd3/marl/train.hpp"
#include "matd3/ops.hpp"

namespace matd3::marl {

namespace {

Eigen::VectorXd concat_obs(const std::vector<Eigen::VectorXd>& obs, const TeamSpec& spec) {
  Eigen::VectorXd x(spec.full_obs);
  for (int i = 0; i < spec.num_agents(); ++i) x.segment(spec.obs_offset[i], spec.obs_size[i]) = obs[i];
  return x;
}

struct EpisodeAccumulator {
  double loss1_sum = 0.0;
  double loss2_sum = 0.0;
  long loss_count = 0;
  double pg_sum = 0.0;
  long pg_count = 0;
};

}  // namespace

TrainResult train(const env::Scenario& scenario, Algorithm algorithm, const HyperParams& hp,
                  std::uint64_t seed, const TrainOptions& options) {
  hp.validate();
  const TeamSpec spec = TeamSpec::from(scenario);
  const int n = scenario.num_agents();

  SeededRng root(seed);
  SeededRng env_rng = root.fork("env");
  SeededRng explore_rng = root.fork("explore");
  SeededRng learn_rng = root.fork("learn");

  TrainResult result;
  result.bundles = make_bundles(scenario, algorithm, hp, root.fork("init"));
  ReplayBuffer buffer(hp.buffer_capacity);
  probe::ProbeCursor cursor;

  for (int episode = 1; episode <= hp.episodes; ++episode) {
    auto [world, obs] = env::reset(scenario, env_rng, hp.steps_per_episode);
    std::vector<double> episodic_reward(n, 0.0);
    std::vector<EpisodeAccumulator> acc(n);

    for (int step = 0; step < hp.steps_per_episode; ++step) {
      const std::vector<Eigen::VectorXd> actions = select_actions(
          result.bundles, obs, hp.exploration_noise, hp.gumbel_temperature, explore_rng);
      auto outcome = env::step(world, scenario, env::joint_action_from_flat(scenario, actions));

      Transition tr;
      tr.x = concat_obs(obs, spec);
      tr.x_next = concat_obs(outcome.result.observations, spec);
      tr.actions = actions;
      tr.rewards = outcome.result.rewards;
      // Horizon expiry is a time limit, not an absorbing state: bootstrap
      // through it.
      tr.done = false;
      if (options.probe_enabled) tr.world = world;
      buffer.push(std::move(tr));

      for (int i = 0; i < n; ++i) episodic_reward[i] += outcome.result.rewards[i];
      world = std::move(outcome.world);
      obs = std::move(outcome.result.observations);
      result.env_steps += 1;

      if (buffer.size() >= hp.warmup()) {
        result.clock.critic_updates += 1;
        const bool do_policy = result.clock.policy_due(hp.policy_delay);
        for (int i = 0; i < n; ++i) {
          const auto indices = buffer.sample_indices(hp.batch_size, learn_rng);
          const Batch batch = gather_batch(buffer, indices, spec);
          const Eigen::VectorXd y =
              algorithm == Algorithm::kMaddpg
                  ? maddpg_critic_target(result.bundles, i, batch, spec, hp)
                  : matd3_critic_target(result.bundles, i, batch, spec, hp, learn_rng);
          const CriticLosses losses = critic_update(result.bundles[i], i, batch, y, spec, hp);
          acc[i].loss1_sum += losses.critic1;
          if (result.bundles[i].twin()) acc[i].loss2_sum += losses.critic2;
          acc[i].loss_count += 1;
          if (do_policy) {
            acc[i].pg_sum += policy_update(result.bundles[i], i, batch, spec, hp, result.clock);
            acc[i].pg_count += 1;
            result.policy_update_calls += 1;
            target_update(result.bundles[i], hp.tau);
            result.target_update_calls += 1;
          }
        }
        if (do_policy) result.clock.policy_updates += 1;
      }

      if (options.probe_enabled && result.env_steps % options.eval_cadence == 0) {
        SeededRng probe_rng = root.fork("probe/" + std::to_string(result.env_steps));
        const auto pairs =
            probe::collect_probe_states(buffer, cursor, options.probe_pairs, probe_rng);
        const auto reports = probe::bias_report(
            result.bundles, pairs, scenario, spec, hp, result.env_steps,
            options.probe_rollouts, options.probe_rollout_len, probe_rng.fork("rollouts"));
        for (int i = 0; i < n; ++i)
          result.bias.push_back(BiasRow{result.env_steps, i, reports[i]});
      }
    }

    for (int i = 0; i < n; ++i) {
      MetricsRow row;
      row.episode = episode;
      row.step = result.env_steps;
      row.agent = i;
      row.episodic_reward = episodic_reward[i];
      if (acc[i].loss_count > 0) {
        row.critic_loss_1 = acc[i].loss1_sum / acc[i].loss_count;
        if (result.bundles[i].twin()) row.critic_loss_2 = acc[i].loss2_sum / acc[i].loss_count;
      }
      if (acc[i].pg_count > 0) row.policy_grad_norm = acc[i].pg_sum / acc[i].pg_count;
      row.critic_updates = result.clock.critic_updates;
      row.policy_updates = result.clock.policy_updates;
      result.metrics.push_back(row);
    }
  }
  return result;
}

std::vector<double> random_policy_returns(const env::Scenario& scenario, const HyperParams& hp,
                                          std::uint64_t seed, int episodes) {
  const int n = scenario.num_agents();
  SeededRng rng(seed);
  std::vector<double> total(n, 0.0);
  for (int episode = 0; episode < episodes; ++episode) {
    auto [world, obs] = env::reset(scenario, rng, hp.steps_per_episode);
    while (!world.done()) {
      std::vector<Eigen::VectorXd> actions;
      for (int i = 0; i < n; ++i) {
        const env::ActionSpec aspec = scenario.action_spec(i);
        Eigen::VectorXd a(aspec.flat_dim());
        for (int k = 0; k < aspec.move_dim; ++k) a(k) = rng.uniform(-1.0, 1.0);
        if (aspec.comm_dim > 0)
          a.tail(aspec.comm_dim) = nn::gumbel_softmax<double>(
              Eigen::VectorXd::Zero(aspec.comm_dim), hp.gumbel_temperature, rng);
        actions.push_back(std::move(a));
      }
      auto outcome = env::step(world, scenario, env::joint_action_from_flat(scenario, actions));
      for (int i = 0; i < n; ++i) total[i] += outcome.result.rewards[i];
      world = std::move(outcome.world);
    }
  }
  for (double& v : total) v /= episodes;
  return total;
}

std::vector<double> evaluate_policy(const env::Scenario& scenario,
                                    const std::vector<AgentBundle>& bundles,
                                    const HyperParams& hp, std::uint64_t seed, int episodes) {
  const int n = scenario.num_agents();
  SeededRng rng(seed);
  std::vector<double> total(n, 0.0);
  for (int episode = 0; episode < episodes; ++episode) {
    auto [world, obs] = env::reset(scenario, rng, hp.steps_per_episode);
    while (!world.done()) {
      const auto actions = deterministic_actions(bundles, obs, hp.gumbel_temperature);
      auto outcome = env::step(world, scenario, env::joint_action_from_flat(scenario, actions));
      for (int i = 0; i < n; ++i) total[i] += outcome.result.rewards[i];
      world = std::move(outcome.world);
      obs = std::move(outcome.result.observations);
    }
  }
  for (double& v : total) v /= episodes;
  return total;
}

namespace {

void write_num(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows,
                       const std::string& header_comment) {
  if (!header_comment.empty()) os << header_comment << "\n";
  os << "episode,step,agent,episodic_reward,critic_loss_1,critic_loss_2,policy_grad_norm,"
        "critic_updates,policy_updates\n";
  for (const MetricsRow& r : rows) {
    os << r.episode << ',' << r.step << ',' << r.agent << ',';
    write_num(os, r.episodic_reward);
    os << ',';
    write_num(os, r.critic_loss_1);
    os << ',';
    write_num(os, r.critic_loss_2);
    os << ',';
    write_num(os, r.policy_grad_norm);
    os << ',' << r.critic_updates << ',' << r.policy_updates << "\n";
  }
}

void write_bias_csv(std::ostream& os, const std::vector<BiasRow>& rows,
                    const std::string& header_comment) {
  if (!header_comment.empty()) os << header_comment << "\n";
  os << "eval_step,agent,mean_estimated,mean_true,bias,ci95,n\n";
  for (const BiasRow& r : rows) {
    os << r.eval_step << ',' << r.agent << ',';
    write_num(os, r.report.mean_estimated_q);
    os << ',';
    write_num(os, r.report.mean_true_q);
    os << ',';
    write_num(os, r.report.bias);
    os << ',';
    write_num(os, r.report.ci95_half_width);
    os << ',' << r.report.sample_count << "\n";
  }
}

}  // namespace matd3::marl
