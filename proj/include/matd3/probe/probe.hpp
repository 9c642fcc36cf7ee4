#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "matd3/env/scenario.hpp"
#include "matd3/marl/learner.hpp"
#include "matd3/marl/replay.hpp"

namespace matd3::probe {

/// Joint deterministic policy for rollouts: per-agent observations in,
/// per-agent flat actions out.
using JointPolicy =
    std::function<std::vector<Eigen::VectorXd>(const std::vector<Eigen::VectorXd>&)>;

/// Per-agent Monte-Carlo return estimate with its standard error across
/// rollouts (zero when rollouts collapse to a single deterministic path).
struct McEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_err;
  int n = 0;
};

/// Truncated Monte-Carlo Q: mean over rollouts of sum_{t<rollout_len}
/// gamma^t r_t, with the first action forced to start_actions and the joint
/// policy thereafter. EnvModel requirements:
///   using State = ...;                                  (value type)
///   std::vector<Eigen::VectorXd> observe(const State&) const;
///   std::pair<State, std::vector<double>> step(const State&,
///       const std::vector<Eigen::VectorXd>& actions, SeededRng&) const;
template <class EnvModel>
McEstimate monte_carlo_q(const EnvModel& env, const typename EnvModel::State& start,
                         const std::vector<Eigen::VectorXd>& start_actions,
                         const JointPolicy& policy, double gamma, int n_rollouts,
                         int rollout_len, SeededRng rng) {
  if (n_rollouts < 1) throw Error("monte_carlo_q: need at least one rollout");
  if (rollout_len < 1) throw Error("monte_carlo_q: rollout length must be positive");
  const int n_agents = static_cast<int>(start_actions.size());
  Eigen::MatrixXd returns(n_agents, n_rollouts);
  for (int r = 0; r < n_rollouts; ++r) {
    SeededRng roll_rng = rng.fork("rollout/" + std::to_string(r));
    typename EnvModel::State state = start;
    Eigen::VectorXd ret = Eigen::VectorXd::Zero(n_agents);
    double discount = 1.0;
    for (int t = 0; t < rollout_len; ++t) {
      const std::vector<Eigen::VectorXd> actions =
          t == 0 ? start_actions : policy(env.observe(state));
      auto [next, rewards] = env.step(state, actions, roll_rng);
      for (int i = 0; i < n_agents; ++i) ret(i) += discount * rewards[i];
      discount *= gamma;
      state = std::move(next);
    }
    returns.col(r) = ret;
  }
  McEstimate est;
  est.n = n_rollouts;
  est.mean = returns.rowwise().mean();
  est.std_err = Eigen::VectorXd::Zero(n_agents);
  if (n_rollouts >= 2) {
    for (int i = 0; i < n_agents; ++i) {
      if ((returns.row(i).array() == returns(i, 0)).all()) continue;  // exactly zero variance
      const double var =
          (returns.row(i).array() - est.mean(i)).square().sum() / (n_rollouts - 1);
      est.std_err(i) = std::sqrt(var / n_rollouts);
    }
  }
  return est;
}

/// Particle-world adapter for monte_carlo_q; the environment itself is
/// deterministic, the rng parameter is unused.
struct ParticleEnvModel {
  const env::Scenario* scenario = nullptr;
  using State = env::World;

  std::vector<Eigen::VectorXd> observe(const State& s) const {
    std::vector<Eigen::VectorXd> obs;
    for (int i = 0; i < scenario->num_agents(); ++i) obs.push_back(scenario->observe(s, i));
    return obs;
  }

  std::pair<State, std::vector<double>> step(const State& s,
                                             const std::vector<Eigen::VectorXd>& actions,
                                             SeededRng&) const {
    auto out = env::step(s, *scenario, env::joint_action_from_flat(*scenario, actions));
    return {std::move(out.world), std::move(out.result.rewards)};
  }
};

/// One probed state-action pair: the stored pre-step world and the executed
/// joint action.
struct ProbePair {
  env::World world;
  std::vector<Eigen::VectorXd> actions;
  Eigen::VectorXd x;
};

/// Tracks how much of the buffer the probe has already seen.
struct ProbeCursor {
  std::uint64_t written_marker = 0;
};

/// Uniform sample (without replacement) of up to `count` pairs from the
/// transitions written since the cursor's marker; advances the marker.
/// Requires transitions stored with world snapshots (probe-enabled runs).
std::vector<ProbePair> collect_probe_states(const marl::ReplayBuffer& buffer, ProbeCursor& cursor,
                                            int count, SeededRng& rng);

struct BiasReport {
  long eval_step = 0;
  double mean_estimated_q = 0.0;
  double mean_true_q = 0.0;
  double bias = 0.0;  // estimated - true
  double ci95_half_width = std::numeric_limits<double>::quiet_NaN();  // across runs; NaN per run
  long sample_count = 0;
  double mc_std_err = 0.0;  // pooled Monte-Carlo standard error of mean_true_q
};

/// Critic evaluator: per probe pair index and agent, the estimated Q value.
using QEvaluator = std::function<double(std::size_t pair_index, int agent)>;

/// Core bias computation, generic in the environment model and the critic
/// being audited: bias = mean(estimated) - mean(Monte-Carlo truth) per agent.
template <class EnvModel>
std::vector<BiasReport> bias_report_generic(
    const EnvModel& env, const QEvaluator& q,
    const std::vector<typename EnvModel::State>& states,
    const std::vector<std::vector<Eigen::VectorXd>>& start_actions, int n_agents,
    const JointPolicy& policy, double gamma, long eval_step, int n_rollouts, int rollout_len,
    SeededRng rng) {
  if (states.empty()) throw Error("bias_report: no probe pairs");
  if (states.size() != start_actions.size())
    throw Error("bias_report: states/actions size mismatch");
  Eigen::VectorXd est_sum = Eigen::VectorXd::Zero(n_agents);
  Eigen::VectorXd true_sum = Eigen::VectorXd::Zero(n_agents);
  Eigen::VectorXd var_sum = Eigen::VectorXd::Zero(n_agents);
  for (std::size_t k = 0; k < states.size(); ++k) {
    const McEstimate mc = monte_carlo_q(env, states[k], start_actions[k], policy, gamma,
                                        n_rollouts, rollout_len,
                                        rng.fork("pair/" + std::to_string(k)));
    for (int i = 0; i < n_agents; ++i) {
      est_sum(i) += q(k, i);
      true_sum(i) += mc.mean(i);
      var_sum(i) += mc.std_err(i) * mc.std_err(i);
    }
  }
  std::vector<BiasReport> reports;
  const double n = static_cast<double>(states.size());
  for (int i = 0; i < n_agents; ++i) {
    BiasReport r;
    r.eval_step = eval_step;
    r.sample_count = static_cast<long>(states.size());
    r.mean_estimated_q = est_sum(i) / n;
    r.mean_true_q = true_sum(i) / n;
    r.bias = r.mean_estimated_q - r.mean_true_q;
    r.mc_std_err = std::sqrt(var_sum(i)) / n;
    reports.push_back(r);
  }
  return reports;
}

/// Production probe: estimates come from each agent's first critic, rollouts
/// follow the current deterministic policies. Touches neither the bundles
/// nor any training RNG stream.
std::vector<BiasReport> bias_report(const std::vector<marl::AgentBundle>& bundles,
                                    const std::vector<ProbePair>& pairs,
                                    const env::Scenario& scenario, const marl::TeamSpec& spec,
                                    const marl::HyperParams& hp, long eval_step, int n_rollouts,
                                    int rollout_len, SeededRng rng);

}  // namespace matd3::probe
