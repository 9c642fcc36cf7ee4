#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace matd3::env {

/// Fixed physics constants. Tuned once so runs are reproducible; changing
/// them invalidates recorded trajectories and learning curves.
struct Physics {
  static constexpr double dt = 0.1;
  static constexpr double damping = 0.75;      // multiplicative velocity retention per step
  static constexpr double force_scale = 5.0;   // control force multiplier, unit mass
  static constexpr double contact_k = 100.0;   // spring constant of the overlap force
  static constexpr double boundary_k = 10.0;   // soft pushback beyond |coordinate| > 1
  static constexpr double arena_half = 1.0;
};

struct Entity {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double radius = 0.1;
  bool movable = true;
  std::optional<double> max_speed;
  int color_tag = 0;
};

/// Full simulation state; a plain value. Agent ordering is fixed for the
/// episode: observation and action indexing depend on it.
struct World {
  std::vector<Entity> agents;
  std::vector<Entity> landmarks;
  int t = 0;
  std::string scenario_id;
  int horizon = 25;

  // Scenario state.
  int target_index = -1;                      // goal landmark where a scenario designates one
  std::vector<Eigen::VectorXd> comm_state;    // comm emitted last step, delivered this step

  int num_agents() const { return static_cast<int>(agents.size()); }
  bool done() const { return t >= horizon; }
};

struct AgentAction {
  Eigen::Vector2d move = Eigen::Vector2d::Zero();  // force in [-1,1]^2
  Eigen::VectorXd comm;                            // relaxed one-hot, size 0 when absent
};
using JointAction = std::vector<AgentAction>;

struct StepResult {
  std::vector<Eigen::VectorXd> observations;
  std::vector<double> rewards;
  bool done = false;
};

}  // namespace matd3::env
