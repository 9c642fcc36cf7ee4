#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matd3/env/scenario.hpp"
#include "matd3/net.hpp"

namespace matd3::marl {

enum class Algorithm { kMaddpg, kMatd3, kIlTd3 };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm a);

struct HyperParams {
  double gamma = 0.95;
  double tau = 0.01;
  int policy_delay = 2;          // d: policy/target updates once per d critic updates
  double smoothing_sigma = 0.2;  // target policy smoothing N(0, sigma)
  double smoothing_clip = 0.5;   // clip bound c
  double lr = 0.01;
  int batch_size = 256;
  std::size_t buffer_capacity = 100000;
  double exploration_noise = 0.2;  // stddev of action-space Gaussian, 0.1 of the [-1,1] range
  int episodes = 5000;
  int steps_per_episode = 25;
  double gumbel_temperature = 1.0;
  int hidden_units = 64;  // two hidden layers of this width
  bool sigmoid_policy = true;  // movement policies squash through SigmoidScaled(-1, 1)

  std::size_t warmup() const { return std::max<std::size_t>(batch_size, 1024); }
  void validate() const;
};

/// One agent's learnable state: policy, twin centralized critics and their
/// target copies. MADDPG carries a single critic (critic2 absent); the
/// independent-learner variant feeds its critics (o_i, a_i) only.
struct AgentBundle {
  nn::DenseNetd policy;
  nn::DenseNetd policy_target;
  nn::DenseNetd critic1;
  nn::DenseNetd critic1_target;
  std::optional<nn::DenseNetd> critic2;
  std::optional<nn::DenseNetd> critic2_target;
  nn::AdamStated policy_adam;
  nn::AdamStated critic1_adam;
  nn::AdamStated critic2_adam;

  env::ActionSpec action_spec;
  int obs_dim = 0;
  int critic_input_dim = 0;
  bool centralized = true;

  bool twin() const { return critic2.has_value(); }
};

/// policy_updates == floor(critic_updates / d) after every completed round.
struct UpdateClock {
  std::uint64_t critic_updates = 0;
  std::uint64_t policy_updates = 0;

  bool policy_due(int d) const { return d >= 1 && critic_updates % d == 0; }
  bool invariant_holds(int d) const {
    return d >= 1 && policy_updates == critic_updates / static_cast<std::uint64_t>(d);
  }
};

/// Freshly initialized bundles for every agent of the scenario. Critic input
/// layout: concatenated observations in agent order, then flat actions in
/// agent order (decentralized critics see only their own pair).
std::vector<AgentBundle> make_bundles(const env::Scenario& scenario, Algorithm algorithm,
                                      const HyperParams& hp, SeededRng rng);

}  // namespace matd3::marl
