#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "matd3/marl/learner.hpp"
#include "matd3/probe/probe.hpp"

namespace matd3::marl {

/// One metrics record per (episode, agent). Loss and gradient columns are
/// episode means over the updates that actually ran (NaN before warmup and
/// NaN for critic_loss_2 under single-critic variants).
struct MetricsRow {
  int episode = 0;
  long step = 0;  // cumulative environment steps at episode end
  int agent = 0;
  double episodic_reward = 0.0;
  double critic_loss_1 = std::numeric_limits<double>::quiet_NaN();
  double critic_loss_2 = std::numeric_limits<double>::quiet_NaN();
  double policy_grad_norm = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t critic_updates = 0;
  std::uint64_t policy_updates = 0;
};

struct BiasRow {
  long eval_step = 0;
  int agent = 0;
  probe::BiasReport report;
};

struct TrainOptions {
  bool probe_enabled = false;
  long eval_cadence = 1000;  // environment steps between bias evaluations
  int probe_pairs = 100;
  int probe_rollouts = 200;
  int probe_rollout_len = 100;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::vector<BiasRow> bias;
  std::vector<AgentBundle> bundles;
  UpdateClock clock;
  std::uint64_t policy_update_calls = 0;  // per-agent policy steps
  std::uint64_t target_update_calls = 0;  // per-agent soft updates
  long env_steps = 0;
};

/// Full training run: act, store, per-agent critic update each step once the
/// buffer holds warmup() transitions, policy and target updates every
/// policy_delay critic rounds. Deterministic given (scenario, algorithm,
/// hp, seed, options).
TrainResult train(const env::Scenario& scenario, Algorithm algorithm, const HyperParams& hp,
                  std::uint64_t seed, const TrainOptions& options = {});

/// Mean per-agent episodic return of a uniform-random policy (movement
/// uniform in [-1,1]^2, comm a Gumbel-Softmax draw over flat logits).
std::vector<double> random_policy_returns(const env::Scenario& scenario, const HyperParams& hp,
                                          std::uint64_t seed, int episodes);

/// Mean per-agent episodic return of the bundles' deterministic policies.
std::vector<double> evaluate_policy(const env::Scenario& scenario,
                                    const std::vector<AgentBundle>& bundles,
                                    const HyperParams& hp, std::uint64_t seed, int episodes);

/// CSV emission. header_comment, when nonempty, is written first verbatim
/// (callers put the config hash and build id there). Number formatting is
/// locale-independent %.17g so identical runs produce identical bytes.
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows,
                       const std::string& header_comment);
void write_bias_csv(std::ostream& os, const std::vector<BiasRow>& rows,
                    const std::string& header_comment);

}  // namespace matd3::marl
