#include "matd3/marl/agent.hpp"

namespace matd3::marl {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "maddpg") return Algorithm::kMaddpg;
  if (name == "matd3") return Algorithm::kMatd3;
  if (name == "il_td3") return Algorithm::kIlTd3;
  throw Error("unknown algorithm '" + name + "'; expected maddpg, matd3 or il_td3");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kMaddpg:
      return "maddpg";
    case Algorithm::kMatd3:
      return "matd3";
    case Algorithm::kIlTd3:
      return "il_td3";
  }
  throw Error("invalid algorithm enum");
}

void HyperParams::validate() const {
  if (!(gamma > 0.0) || gamma > 1.0) throw Error("hyperparams: gamma must lie in (0, 1]");
  if (!(tau > 0.0) || tau > 1.0) throw Error("hyperparams: tau must lie in (0, 1]");
  if (policy_delay < 1) throw Error("hyperparams: policy_delay must be >= 1");
  if (smoothing_sigma < 0.0) throw Error("hyperparams: smoothing_sigma must be >= 0");
  if (smoothing_clip < 0.0) throw Error("hyperparams: smoothing_clip must be >= 0");
  if (!(lr > 0.0)) throw Error("hyperparams: lr must be > 0");
  if (batch_size < 1) throw Error("hyperparams: batch_size must be >= 1");
  if (buffer_capacity < 1) throw Error("hyperparams: buffer_capacity must be >= 1");
  if (exploration_noise < 0.0) throw Error("hyperparams: exploration_noise must be >= 0");
  if (episodes < 1) throw Error("hyperparams: episodes must be >= 1");
  if (steps_per_episode < 1) throw Error("hyperparams: steps_per_episode must be >= 1");
  if (!(gumbel_temperature > 0.0)) throw Error("hyperparams: gumbel_temperature must be > 0");
  if (hidden_units < 1) throw Error("hyperparams: hidden_units must be >= 1");
}

std::vector<AgentBundle> make_bundles(const env::Scenario& scenario, Algorithm algorithm,
                                      const HyperParams& hp, SeededRng rng) {
  hp.validate();
  const int n = scenario.num_agents();
  int full_obs = 0;
  int full_act = 0;
  for (int i = 0; i < n; ++i) {
    full_obs += scenario.obs_size(i);
    full_act += scenario.action_spec(i).flat_dim();
  }

  std::vector<AgentBundle> bundles;
  bundles.reserve(n);
  for (int i = 0; i < n; ++i) {
    AgentBundle b;
    b.action_spec = scenario.action_spec(i);
    b.obs_dim = scenario.obs_size(i);
    b.centralized = algorithm != Algorithm::kIlTd3;
    b.critic_input_dim =
        b.centralized ? full_obs + full_act : b.obs_dim + b.action_spec.flat_dim();

    // A pure-movement policy squashes through SigmoidScaled(-1, 1); policies
    // with a comm head emit raw logits for the Gumbel-Softmax channel.
    const bool squash = hp.sigmoid_policy && b.action_spec.comm_dim == 0;
    const auto policy_act =
        squash ? nn::OutputActivation::kSigmoidScaled : nn::OutputActivation::kIdentity;
    const std::vector<int> policy_sizes = {b.obs_dim, hp.hidden_units, hp.hidden_units,
                                           b.action_spec.flat_dim()};
    const std::vector<int> critic_sizes = {b.critic_input_dim, hp.hidden_units, hp.hidden_units,
                                           1};

    auto prng = rng.fork("agent/" + std::to_string(i) + "/policy");
    b.policy = nn::make_net<double>(policy_sizes, prng, policy_act, -1.0, 1.0);
    b.policy_target = b.policy;
    auto c1rng = rng.fork("agent/" + std::to_string(i) + "/critic1");
    b.critic1 = nn::make_net<double>(critic_sizes, c1rng);
    b.critic1_target = b.critic1;
    b.policy_adam = nn::make_adam_state(b.policy);
    b.critic1_adam = nn::make_adam_state(b.critic1);
    if (algorithm != Algorithm::kMaddpg) {
      auto c2rng = rng.fork("agent/" + std::to_string(i) + "/critic2");
      b.critic2 = nn::make_net<double>(critic_sizes, c2rng);
      b.critic2_target = *b.critic2;
      b.critic2_adam = nn::make_adam_state(*b.critic2);
    }
    bundles.push_back(std::move(b));
  }
  return bundles;
}

}  // namespace matd3::marl
