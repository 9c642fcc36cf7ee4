#pragma once

#include <Eigen/Dense>
#include <vector>

#include "matd3/marl/agent.hpp"
#include "matd3/marl/replay.hpp"

namespace matd3::marl {

/// Static shape information of one team: per-agent observation/action slices
/// inside the concatenated full state x and the joint action block.
struct TeamSpec {
  std::vector<int> obs_offset;
  std::vector<int> obs_size;
  std::vector<env::ActionSpec> action_specs;
  std::vector<int> act_offset;
  int full_obs = 0;
  int full_act = 0;

  static TeamSpec from(const env::Scenario& scenario);
  int num_agents() const { return static_cast<int>(obs_size.size()); }
};

/// Column-major minibatch; one column per sampled transition.
struct Batch {
  Eigen::MatrixXd x;
  Eigen::MatrixXd x_next;
  std::vector<Eigen::MatrixXd> actions;  // per agent: flat_dim x S
  std::vector<Eigen::VectorXd> rewards;  // per agent: S
  Eigen::VectorXd done;                  // 1.0 = absorbing terminal
  Eigen::Index size() const { return x.cols(); }
};

Batch gather_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices,
                   const TeamSpec& spec);

/// Differentiable action map applied to raw policy outputs: movement passes
/// through unchanged (the net's own SigmoidScaled output bounds it when
/// configured), comm logits become softmax(logits / temperature) — the
/// noise-free relaxation.
Eigen::MatrixXd deterministic_action_batch(const env::ActionSpec& spec,
                                           const Eigen::MatrixXd& raw, double temperature);

/// Executed actions: deterministic policy output plus exploration.
/// Movement gets Gaussian noise and is clamped to [-1, 1]; comm channels are
/// sampled with Gumbel-Softmax.
std::vector<Eigen::VectorXd> select_actions(const std::vector<AgentBundle>& bundles,
                                            const std::vector<Eigen::VectorXd>& observations,
                                            double noise_scale, double temperature,
                                            SeededRng& rng);

/// Noise-free greedy actions (evaluation / Monte-Carlo rollouts).
std::vector<Eigen::VectorXd> deterministic_actions(const std::vector<AgentBundle>& bundles,
                                                   const std::vector<Eigen::VectorXd>& observations,
                                                   double temperature);

/// Critic input of one agent: [x, a_1..a_N] for centralized critics,
/// [o_i, a_i] for the independent-learner variant.
Eigen::MatrixXd critic_input(const AgentBundle& bundle, int agent, const Eigen::MatrixXd& x,
                             const std::vector<Eigen::MatrixXd>& actions, const TeamSpec& spec);

/// Twin-critic smoothed target:
/// y = r_i + gamma * (1 - done) * min_j Q'_j(x', mu'_1(o'_1)+eps, ...).
/// Every agent's target action gets an independent clipped Gaussian draw.
Eigen::VectorXd matd3_critic_target(const std::vector<AgentBundle>& bundles, int agent,
                                    const Batch& batch, const TeamSpec& spec,
                                    const HyperParams& hp, SeededRng& rng);

/// Single-critic target without smoothing noise; rejects twin bundles.
Eigen::VectorXd maddpg_critic_target(const std::vector<AgentBundle>& bundles, int agent,
                                     const Batch& batch, const TeamSpec& spec,
                                     const HyperParams& hp);

struct CriticLosses {
  double critic1 = 0.0;
  double critic2 = std::numeric_limits<double>::quiet_NaN();  // NaN when absent
};

/// One Adam step on every critic present, both trained on the same y.
/// Returns the pre-update mean squared errors.
CriticLosses critic_update(AgentBundle& bundle, int agent, const Batch& batch,
                           const Eigen::VectorXd& y, const TeamSpec& spec, const HyperParams& hp);

struct PolicyGradient {
  nn::NetGradsd grads;      // dJ/dtheta, mean over the batch
  double objective = 0.0;   // J itself
};

/// Gradient of J = mean_b Q_1(x^b, a^b_1, ..., mu_i(o^b_i), ..., a^b_N)
/// w.r.t. agent i's policy parameters; other agents' actions come from the
/// batch. Pure: touches nothing.
PolicyGradient policy_objective_gradient(const AgentBundle& bundle, int agent, const Batch& batch,
                                         const TeamSpec& spec, const HyperParams& hp);

/// Ascent step on J through the first critic. Returns the policy gradient
/// norm. Throws unless the clock permits a policy update
/// (critic_updates mod d == 0).
double policy_update(AgentBundle& bundle, int agent, const Batch& batch, const TeamSpec& spec,
                     const HyperParams& hp, const UpdateClock& clock);

/// Polyak step on all of the bundle's target networks.
void target_update(AgentBundle& bundle, double tau);

}  // namespace matd3::marl
