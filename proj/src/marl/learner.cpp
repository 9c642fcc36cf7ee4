#include <limits>

#include "matd3/marl/learner.hpp"
#include "matd3/ops.hpp"

namespace matd3::marl {

TeamSpec TeamSpec::from(const env::Scenario& scenario) {
  TeamSpec spec;
  const int n = scenario.num_agents();
  for (int i = 0; i < n; ++i) {
    spec.obs_offset.push_back(spec.full_obs);
    spec.obs_size.push_back(scenario.obs_size(i));
    spec.full_obs += scenario.obs_size(i);
    spec.action_specs.push_back(scenario.action_spec(i));
    spec.act_offset.push_back(spec.full_act);
    spec.full_act += scenario.action_spec(i).flat_dim();
  }
  return spec;
}

Batch gather_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices,
                   const TeamSpec& spec) {
  const Eigen::Index s = static_cast<Eigen::Index>(indices.size());
  if (s == 0) throw Error("gather_batch: empty index set");
  Batch batch;
  batch.x.resize(spec.full_obs, s);
  batch.x_next.resize(spec.full_obs, s);
  batch.done.resize(s);
  const int n = spec.num_agents();
  for (int i = 0; i < n; ++i) {
    batch.actions.emplace_back(spec.action_specs[i].flat_dim(), s);
    batch.rewards.emplace_back(s);
  }
  for (Eigen::Index col = 0; col < s; ++col) {
    const Transition& t = buffer[indices[col]];
    if (t.x.size() != spec.full_obs)
      throw DimensionError("gather_batch: stored x size", spec.full_obs, t.x.size());
    batch.x.col(col) = t.x;
    batch.x_next.col(col) = t.x_next;
    batch.done(col) = t.done ? 1.0 : 0.0;
    for (int i = 0; i < n; ++i) {
      batch.actions[i].col(col) = t.actions[i];
      batch.rewards[i](col) = t.rewards[i];
    }
  }
  return batch;
}

Eigen::MatrixXd deterministic_action_batch(const env::ActionSpec& spec,
                                           const Eigen::MatrixXd& raw, double temperature) {
  if (raw.rows() != spec.flat_dim())
    throw DimensionError("deterministic_action_batch: raw output rows", spec.flat_dim(),
                         raw.rows());
  Eigen::MatrixXd a = raw;
  if (spec.comm_dim > 0) {
    for (Eigen::Index col = 0; col < raw.cols(); ++col) {
      const Eigen::VectorXd logits = raw.col(col).tail(spec.comm_dim);
      a.col(col).tail(spec.comm_dim) = nn::relaxed_onehot<double>(logits, temperature);
    }
  }
  return a;
}

std::vector<Eigen::VectorXd> select_actions(const std::vector<AgentBundle>& bundles,
                                            const std::vector<Eigen::VectorXd>& observations,
                                            double noise_scale, double temperature,
                                            SeededRng& rng) {
  if (bundles.size() != observations.size())
    throw DimensionError("select_actions: one observation per agent",
                         static_cast<long>(bundles.size()),
                         static_cast<long>(observations.size()));
  std::vector<Eigen::VectorXd> actions;
  actions.reserve(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const AgentBundle& b = bundles[i];
    if (observations[i].size() != b.obs_dim)
      throw DimensionError("select_actions: observation size for agent " + std::to_string(i),
                           b.obs_dim, observations[i].size());
    const Eigen::VectorXd raw = nn::forward_value(b.policy, observations[i]);
    Eigen::VectorXd a(b.action_spec.flat_dim());
    if (b.action_spec.move_dim == 2) {
      for (int k = 0; k < 2; ++k) {
        const double noisy = raw(k) + (noise_scale > 0.0 ? rng.normal(0.0, noise_scale) : 0.0);
        a(k) = std::clamp(noisy, -1.0, 1.0);
      }
    }
    if (b.action_spec.comm_dim > 0) {
      const Eigen::VectorXd logits = raw.tail(b.action_spec.comm_dim);
      a.tail(b.action_spec.comm_dim) = nn::gumbel_softmax<double>(logits, temperature, rng);
    }
    actions.push_back(std::move(a));
  }
  return actions;
}

std::vector<Eigen::VectorXd> deterministic_actions(const std::vector<AgentBundle>& bundles,
                                                   const std::vector<Eigen::VectorXd>& observations,
                                                   double temperature) {
  std::vector<Eigen::VectorXd> actions;
  actions.reserve(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const Eigen::VectorXd raw = nn::forward_value(bundles[i].policy, observations[i]);
    Eigen::MatrixXd mapped = deterministic_action_batch(bundles[i].action_spec, raw, temperature);
    Eigen::VectorXd a = mapped.col(0);
    if (bundles[i].action_spec.move_dim == 2)
      a.head<2>() = a.head<2>().cwiseMax(-1.0).cwiseMin(1.0);
    actions.push_back(std::move(a));
  }
  return actions;
}

Eigen::MatrixXd critic_input(const AgentBundle& bundle, int agent, const Eigen::MatrixXd& x,
                             const std::vector<Eigen::MatrixXd>& actions, const TeamSpec& spec) {
  const Eigen::Index s = x.cols();
  Eigen::MatrixXd z(bundle.critic_input_dim, s);
  if (bundle.centralized) {
    z.topRows(spec.full_obs) = x;
    for (int j = 0; j < spec.num_agents(); ++j)
      z.middleRows(spec.full_obs + spec.act_offset[j], spec.action_specs[j].flat_dim()) =
          actions[j];
  } else {
    z.topRows(spec.obs_size[agent]) = x.middleRows(spec.obs_offset[agent], spec.obs_size[agent]);
    z.bottomRows(spec.action_specs[agent].flat_dim()) = actions[agent];
  }
  return z;
}

namespace {

/// Deterministic target-policy actions for the successor states, optionally
/// smoothed with independent clipped Gaussian noise per agent.
std::vector<Eigen::MatrixXd> target_actions(const std::vector<AgentBundle>& bundles,
                                            const Batch& batch, const TeamSpec& spec,
                                            const HyperParams& hp, SeededRng* noise_rng) {
  std::vector<Eigen::MatrixXd> acts(bundles.size());
  for (std::size_t j = 0; j < bundles.size(); ++j) {
    const Eigen::MatrixXd obs =
        batch.x_next.middleRows(spec.obs_offset[j], spec.obs_size[j]);
    const Eigen::MatrixXd raw = nn::forward_value_batch(bundles[j].policy_target, obs);
    Eigen::MatrixXd a = deterministic_action_batch(spec.action_specs[j], raw,
                                                   hp.gumbel_temperature);
    if (noise_rng != nullptr && hp.smoothing_sigma > 0.0 && hp.smoothing_clip > 0.0) {
      for (Eigen::Index col = 0; col < a.cols(); ++col)
        a.col(col) += nn::clipped_gaussian<double>(static_cast<int>(a.rows()),
                                                   hp.smoothing_sigma, hp.smoothing_clip,
                                                   *noise_rng);
    }
    acts[j] = std::move(a);
  }
  return acts;
}

Eigen::VectorXd bootstrap(const Batch& batch, int agent, const Eigen::VectorXd& next_q,
                          double gamma) {
  return batch.rewards[agent].array() +
         gamma * (1.0 - batch.done.array()) * next_q.array();
}

void check_finite_target(const Eigen::VectorXd& y, int agent) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!std::isfinite(y(i)))
      throw NonFiniteError("critic target for agent " + std::to_string(agent) +
                           " is non-finite at batch column " + std::to_string(i) +
                           " (y = " + std::to_string(y(i)) + ")");
}

}  // namespace

Eigen::VectorXd matd3_critic_target(const std::vector<AgentBundle>& bundles, int agent,
                                    const Batch& batch, const TeamSpec& spec,
                                    const HyperParams& hp, SeededRng& rng) {
  const AgentBundle& b = bundles[agent];
  if (!b.twin())
    throw Error("matd3_critic_target: bundle has a single critic (variant mismatch)");
  if (batch.size() == 0) throw Error("matd3_critic_target: empty batch");
  const auto acts = target_actions(bundles, batch, spec, hp, &rng);
  const Eigen::MatrixXd z = critic_input(b, agent, batch.x_next, acts, spec);
  const Eigen::VectorXd q1 = nn::forward_value_batch(b.critic1_target, z).row(0);
  const Eigen::VectorXd q2 = nn::forward_value_batch(*b.critic2_target, z).row(0);
  Eigen::VectorXd y = bootstrap(batch, agent, q1.cwiseMin(q2), hp.gamma);
  check_finite_target(y, agent);
  return y;
}

Eigen::VectorXd maddpg_critic_target(const std::vector<AgentBundle>& bundles, int agent,
                                     const Batch& batch, const TeamSpec& spec,
                                     const HyperParams& hp) {
  const AgentBundle& b = bundles[agent];
  if (b.twin())
    throw Error("maddpg_critic_target: bundle carries twin critics (variant mismatch)");
  if (batch.size() == 0) throw Error("maddpg_critic_target: empty batch");
  const auto acts = target_actions(bundles, batch, spec, hp, nullptr);
  const Eigen::MatrixXd z = critic_input(b, agent, batch.x_next, acts, spec);
  const Eigen::VectorXd q = nn::forward_value_batch(b.critic1_target, z).row(0);
  Eigen::VectorXd y = bootstrap(batch, agent, q, hp.gamma);
  check_finite_target(y, agent);
  return y;
}

namespace {

double one_critic_step(nn::DenseNetd& critic, nn::AdamStated& adam, const Eigen::MatrixXd& z,
                       const Eigen::VectorXd& y, double lr, int agent) {
  const Eigen::Index s = z.cols();
  auto [q, cache] = nn::forward_batch(critic, z);
  const Eigen::RowVectorXd residual = q.row(0) - y.transpose();
  const double loss = residual.squaredNorm() / static_cast<double>(s);
  if (!std::isfinite(loss)) {
    Eigen::Index bad = 0;
    for (Eigen::Index i = 0; i < s; ++i)
      if (!std::isfinite(residual(i))) {
        bad = i;
        break;
      }
    throw NonFiniteError("critic_update agent " + std::to_string(agent) +
                         ": non-finite loss at batch column " + std::to_string(bad) +
                         " (q = " + std::to_string(q(0, bad)) +
                         ", y = " + std::to_string(y(bad)) + ")");
  }
  const Eigen::MatrixXd upstream = (2.0 / static_cast<double>(s)) * residual;
  auto [grads, in_grad] = nn::backward_batch(critic, cache, upstream);
  nn::adam_step(critic, grads, adam, lr);
  return loss;
}

}  // namespace

CriticLosses critic_update(AgentBundle& bundle, int agent, const Batch& batch,
                           const Eigen::VectorXd& y, const TeamSpec& spec, const HyperParams& hp) {
  if (y.size() != batch.size())
    throw DimensionError("critic_update: target size", batch.size(), y.size());
  const Eigen::MatrixXd z = critic_input(bundle, agent, batch.x, batch.actions, spec);
  CriticLosses losses;
  losses.critic1 = one_critic_step(bundle.critic1, bundle.critic1_adam, z, y, hp.lr, agent);
  if (bundle.twin())
    losses.critic2 = one_critic_step(*bundle.critic2, bundle.critic2_adam, z, y, hp.lr, agent);
  return losses;
}

PolicyGradient policy_objective_gradient(const AgentBundle& bundle, int agent, const Batch& batch,
                                         const TeamSpec& spec, const HyperParams& hp) {
  const Eigen::Index s = batch.size();
  const env::ActionSpec& aspec = bundle.action_spec;

  const Eigen::MatrixXd obs = batch.x.middleRows(spec.obs_offset[agent], spec.obs_size[agent]);
  auto [raw, policy_cache] = nn::forward_batch(bundle.policy, obs);
  const Eigen::MatrixXd own_action =
      deterministic_action_batch(aspec, raw, hp.gumbel_temperature);

  std::vector<Eigen::MatrixXd> actions = batch.actions;
  actions[agent] = own_action;
  const Eigen::MatrixXd z = critic_input(bundle, agent, batch.x, actions, spec);

  auto [q, critic_cache] = nn::forward_batch(bundle.critic1, z);
  const Eigen::MatrixXd upstream =
      Eigen::MatrixXd::Constant(1, s, 1.0 / static_cast<double>(s));
  const Eigen::MatrixXd in_grad =
      nn::backward_input_batch(bundle.critic1, critic_cache, upstream);

  const int act_rows_begin = bundle.centralized ? spec.full_obs + spec.act_offset[agent]
                                                : spec.obs_size[agent];
  Eigen::MatrixXd dj_da = in_grad.middleRows(act_rows_begin, aspec.flat_dim());

  // Pull the gradient back through the comm relaxation; movement is identity.
  Eigen::MatrixXd dj_draw = dj_da;
  if (aspec.comm_dim > 0) {
    for (Eigen::Index col = 0; col < s; ++col) {
      const Eigen::VectorXd ycol = own_action.col(col).tail(aspec.comm_dim);
      const Eigen::VectorXd ucol = dj_da.col(col).tail(aspec.comm_dim);
      dj_draw.col(col).tail(aspec.comm_dim) =
          nn::relaxed_onehot_backward<double>(ycol, ucol, hp.gumbel_temperature);
    }
  }

  auto [policy_grads, obs_grad] = nn::backward_batch(bundle.policy, policy_cache, dj_draw);
  (void)obs_grad;

  PolicyGradient out;
  out.grads = std::move(policy_grads);
  out.objective = q.row(0).mean();
  return out;
}

double policy_update(AgentBundle& bundle, int agent, const Batch& batch, const TeamSpec& spec,
                     const HyperParams& hp, const UpdateClock& clock) {
  if (!clock.policy_due(hp.policy_delay))
    throw Error("policy_update: update clock forbids a policy step (critic_updates = " +
                std::to_string(clock.critic_updates) + ", d = " +
                std::to_string(hp.policy_delay) + ")");
  PolicyGradient pg = policy_objective_gradient(bundle, agent, batch, spec, hp);
  const double norm = nn::grad_norm(pg.grads);

  // Gradient ascent on J: feed Adam the negated gradient.
  for (auto& w : pg.grads.weights) w = -w;
  for (auto& b : pg.grads.biases) b = -b;
  nn::adam_step(bundle.policy, pg.grads, bundle.policy_adam, hp.lr);
  return norm;
}

void target_update(AgentBundle& bundle, double tau) {
  nn::soft_update(bundle.policy_target, bundle.policy, tau);
  nn::soft_update(bundle.critic1_target, bundle.critic1, tau);
  if (bundle.twin()) nn::soft_update(*bundle.critic2_target, *bundle.critic2, tau);
}

}  // namespace matd3::marl
