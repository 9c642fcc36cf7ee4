#pragma once

#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "matd3/env/world.hpp"
#include "matd3/errors.hpp"
#include "matd3/rng.hpp"

namespace matd3::env {

/// Per-agent action layout: move_dim is 0 (agent cannot move itself) or 2;
/// comm_dim is the width of the discrete channel, 0 when absent. The flat
/// action vector used by learners and the replay buffer is [move, comm].
struct ActionSpec {
  int move_dim = 2;
  int comm_dim = 0;
  int flat_dim() const { return move_dim + comm_dim; }
};

/// A task definition: world construction, observations and rewards.
/// Implementations must be deterministic functions of (rng stream, world).
class Scenario {
 public:
  virtual ~Scenario() = default;
  virtual std::string id() const = 0;
  virtual int num_agents() const = 0;
  virtual ActionSpec action_spec(int agent) const = 0;
  virtual int obs_size(int agent) const = 0;
  /// Sampled initial world: velocities zero, t = 0, entities placed without
  /// overlap (rejection sampling, 90% of radius-sum clearance).
  virtual World make_world(SeededRng& rng, int horizon) const = 0;
  virtual Eigen::VectorXd observe(const World& w, int agent) const = 0;
  virtual std::vector<double> rewards(const World& w) const = 0;
};

/// String-keyed scenario registry. Built-in tasks self-register; additional
/// tasks (e.g. keep_away, covert_communication) can be plugged in by callers
/// before use.
class ScenarioRegistry {
 public:
  using Factory = std::function<std::shared_ptr<const Scenario>()>;

  /// Process-wide registry; built-in tasks are registered on first access.
  static ScenarioRegistry& instance();

  void add(const std::string& id, Factory factory);
  std::shared_ptr<const Scenario> create(const std::string& id) const;
  std::vector<std::string> registered() const;

 private:
  std::map<std::string, Factory> factories_;
};

/// Registers the four built-in tasks; invoked automatically by instance().
void register_builtin_scenarios(ScenarioRegistry& registry);

/// (World, initial observations) for a registered scenario.
std::pair<World, std::vector<Eigen::VectorXd>> reset(const Scenario& scenario, SeededRng& rng,
                                                     int horizon);

struct StepOutcome {
  World world;
  StepResult result;
};

/// Pure transition: one physics tick, rewards and fresh observations.
/// Throws when the world is already done or the action is malformed.
StepOutcome step(const World& world, const Scenario& scenario, const JointAction& action);

/// Flat-vector convenience used by learners: per-agent [move, comm] slices.
JointAction joint_action_from_flat(const Scenario& scenario,
                                   const std::vector<Eigen::VectorXd>& flat);

/// Trajectory dump: header line naming every column, then one CSV row per
/// step with (t, entity positions/velocities, actions, rewards).
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::ostream& os, const Scenario& scenario);
  void record(const World& world_before, const JointAction& action,
              const std::vector<double>& rewards);

 private:
  std::ostream& os_;
  const Scenario& scenario_;
};

}  // namespace matd3::env
