#include "matd3/probe/probe.hpp"

namespace matd3::probe {

std::vector<ProbePair> collect_probe_states(const marl::ReplayBuffer& buffer, ProbeCursor& cursor,
                                            int count, SeededRng& rng) {
  if (count < 1) throw Error("collect_probe_states: count must be positive");
  if (cursor.written_marker > buffer.total_written())
    throw Error("collect_probe_states: marker is ahead of the buffer write position");
  const auto window = buffer.resident_since(cursor.written_marker);
  if (window.empty())
    throw Error(
        "collect_probe_states: no transitions written since the last evaluation; "
        "increase the evaluation interval");
  std::vector<std::uint64_t> chosen;
  if (static_cast<int>(window.size()) <= count) {
    chosen = window;
  } else {
    for (const std::size_t k : sample_distinct(rng, window.size(), count))
      chosen.push_back(window[k]);
  }
  std::vector<ProbePair> pairs;
  pairs.reserve(chosen.size());
  for (const std::uint64_t seq : chosen) {
    const marl::Transition& t = buffer.at_seq(seq);
    if (!t.world)
      throw Error("collect_probe_states: transition lacks a world snapshot; "
                  "enable probing before training");
    ProbePair p;
    p.world = *t.world;
    p.actions = t.actions;
    p.x = t.x;
    pairs.push_back(std::move(p));
  }
  cursor.written_marker = buffer.total_written();
  return pairs;
}

std::vector<BiasReport> bias_report(const std::vector<marl::AgentBundle>& bundles,
                                    const std::vector<ProbePair>& pairs,
                                    const env::Scenario& scenario, const marl::TeamSpec& spec,
                                    const marl::HyperParams& hp, long eval_step, int n_rollouts,
                                    int rollout_len, SeededRng rng) {
  const QEvaluator q = [&](std::size_t k, int agent) {
    const ProbePair& pair = pairs[k];
    Eigen::MatrixXd x(pair.x.size(), 1);
    x.col(0) = pair.x;
    std::vector<Eigen::MatrixXd> actions;
    for (const auto& a : pair.actions) {
      Eigen::MatrixXd m(a.size(), 1);
      m.col(0) = a;
      actions.push_back(std::move(m));
    }
    const Eigen::MatrixXd z = marl::critic_input(bundles[agent], agent, x, actions, spec);
    return nn::forward_value_batch(bundles[agent].critic1, z)(0, 0);
  };
  const JointPolicy policy = [&](const std::vector<Eigen::VectorXd>& obs) {
    return marl::deterministic_actions(bundles, obs, hp.gumbel_temperature);
  };
  ParticleEnvModel model{&scenario};
  std::vector<env::World> states;
  std::vector<std::vector<Eigen::VectorXd>> start_actions;
  for (const ProbePair& pair : pairs) {
    env::World start = pair.world;
    // Rollouts run past the training horizon: truncation there is a time
    // limit, not an absorbing state.
    start.horizon = start.t + rollout_len + 1;
    states.push_back(std::move(start));
    start_actions.push_back(pair.actions);
  }
  return bias_report_generic(model, q, states, start_actions, scenario.num_agents(), policy,
                             hp.gamma, eval_step, n_rollouts, rollout_len, std::move(rng));
}

}  // namespace matd3::probe
