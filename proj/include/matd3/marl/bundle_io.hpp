#pragma once

#include <istream>
#include <ostream>

#include "matd3/checkpoint.hpp"
#include "matd3/marl/agent.hpp"

namespace matd3::marl {

/// AgentBundle checkpoint: a small header followed by network records in
/// declaration order (policy, policy_target, critic1, critic1_target and,
/// for twin variants, critic2, critic2_target). Optimizer state rides along
/// with each live network. Bit-exact round-trip.
inline void save_bundle(std::ostream& os, const AgentBundle& b) {
  namespace d = nn::detail;
  os.write(nn::kCheckpointMagic, 4);
  d::write_le<std::uint32_t>(os, nn::kCheckpointVersion);
  d::write_le<std::uint8_t>(os, b.centralized ? 1 : 0);
  d::write_le<std::uint8_t>(os, b.twin() ? 1 : 0);
  d::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.action_spec.move_dim));
  d::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.action_spec.comm_dim));
  d::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.obs_dim));
  d::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.critic_input_dim));
  nn::save_net(os, b.policy, &b.policy_adam);
  nn::save_net(os, b.policy_target);
  nn::save_net(os, b.critic1, &b.critic1_adam);
  nn::save_net(os, b.critic1_target);
  if (b.twin()) {
    nn::save_net(os, *b.critic2, &b.critic2_adam);
    nn::save_net(os, *b.critic2_target);
  }
}

inline AgentBundle load_bundle(std::istream& is) {
  namespace d = nn::detail;
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, nn::kCheckpointMagic, 4) != 0)
    throw Error("bundle checkpoint: bad magic");
  const auto version = d::read_le<std::uint32_t>(is);
  if (version != nn::kCheckpointVersion)
    throw Error("bundle checkpoint: unsupported version " + std::to_string(version));
  AgentBundle b;
  b.centralized = d::read_le<std::uint8_t>(is) != 0;
  const bool twin = d::read_le<std::uint8_t>(is) != 0;
  b.action_spec.move_dim = static_cast<int>(d::read_le<std::uint32_t>(is));
  b.action_spec.comm_dim = static_cast<int>(d::read_le<std::uint32_t>(is));
  b.obs_dim = static_cast<int>(d::read_le<std::uint32_t>(is));
  b.critic_input_dim = static_cast<int>(d::read_le<std::uint32_t>(is));

  auto policy = nn::load_net(is);
  if (!policy.has_adam) throw Error("bundle checkpoint: policy record lacks optimizer state");
  b.policy = std::move(policy.net);
  b.policy_adam = std::move(policy.adam);
  b.policy_target = nn::load_net(is).net;
  auto critic1 = nn::load_net(is);
  if (!critic1.has_adam) throw Error("bundle checkpoint: critic record lacks optimizer state");
  b.critic1 = std::move(critic1.net);
  b.critic1_adam = std::move(critic1.adam);
  b.critic1_target = nn::load_net(is).net;
  if (twin) {
    auto critic2 = nn::load_net(is);
    if (!critic2.has_adam) throw Error("bundle checkpoint: critic record lacks optimizer state");
    b.critic2 = std::move(critic2.net);
    b.critic2_adam = std::move(critic2.adam);
    b.critic2_target = nn::load_net(is).net;
  }
  return b;
}

}  // namespace matd3::marl
