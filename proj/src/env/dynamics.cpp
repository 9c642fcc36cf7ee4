#include <algorithm>
#include <cmath>
#include <sstream>

#include "matd3/env/scenario.hpp"

namespace matd3::env {

ScenarioRegistry& ScenarioRegistry::instance() {
  static ScenarioRegistry registry;
  static const bool builtins_added = [] {
    register_builtin_scenarios(registry);
    return true;
  }();
  (void)builtins_added;
  return registry;
}

void ScenarioRegistry::add(const std::string& id, Factory factory) {
  factories_[id] = std::move(factory);
}

std::shared_ptr<const Scenario> ScenarioRegistry::create(const std::string& id) const {
  const auto it = factories_.find(id);
  if (it == factories_.end()) {
    std::string known;
    for (const auto& [k, _] : factories_) {
      if (!known.empty()) known += ", ";
      known += k;
    }
    throw Error("unknown scenario '" + id + "'; registered scenarios: " + known);
  }
  return it->second();
}

std::vector<std::string> ScenarioRegistry::registered() const {
  std::vector<std::string> ids;
  for (const auto& [k, _] : factories_) ids.push_back(k);
  return ids;
}

std::pair<World, std::vector<Eigen::VectorXd>> reset(const Scenario& scenario, SeededRng& rng,
                                                     int horizon) {
  if (horizon <= 0) throw Error("reset: horizon must be positive");
  World w = scenario.make_world(rng, horizon);
  w.t = 0;
  w.horizon = horizon;
  w.scenario_id = scenario.id();
  if (w.comm_state.empty()) {
    for (int i = 0; i < scenario.num_agents(); ++i)
      w.comm_state.emplace_back(Eigen::VectorXd::Zero(scenario.action_spec(i).comm_dim));
  }
  std::vector<Eigen::VectorXd> obs;
  for (int i = 0; i < scenario.num_agents(); ++i) obs.push_back(scenario.observe(w, i));
  return {std::move(w), std::move(obs)};
}

namespace {

void validate_action(const Scenario& scenario, const JointAction& action) {
  if (static_cast<int>(action.size()) != scenario.num_agents())
    throw DimensionError("step: joint action agent count", scenario.num_agents(),
                         static_cast<long>(action.size()));
  for (int i = 0; i < scenario.num_agents(); ++i) {
    const ActionSpec spec = scenario.action_spec(i);
    if (action[i].comm.size() != spec.comm_dim)
      throw DimensionError("step: comm dimension for agent " + std::to_string(i), spec.comm_dim,
                           action[i].comm.size());
    if (!action[i].move.allFinite() || !action[i].comm.allFinite())
      throw NonFiniteError("step: non-finite action for agent " + std::to_string(i));
  }
}

}  // namespace

StepOutcome step(const World& world, const Scenario& scenario, const JointAction& action) {
  if (world.done())
    throw Error("step: world is done (t = " + std::to_string(world.t) + ", horizon = " +
                std::to_string(world.horizon) + "); reset before stepping");
  validate_action(scenario, action);

  World w = world;
  const int n_agents = w.num_agents();
  const int n_entities = n_agents + static_cast<int>(w.landmarks.size());
  const auto entity = [&](int e) -> Entity& {
    return e < n_agents ? w.agents[e] : w.landmarks[e - n_agents];
  };

  std::vector<Eigen::Vector2d> force(n_entities, Eigen::Vector2d::Zero());

  // Control forces, clamped to the unit box.
  for (int i = 0; i < n_agents; ++i) {
    if (!w.agents[i].movable) continue;
    const Eigen::Vector2d u = action[i].move.cwiseMax(-1.0).cwiseMin(1.0);
    force[i] += u * Physics::force_scale;
  }

  // Pairwise contact springs, equal and opposite, movable entities only.
  for (int a = 0; a < n_entities; ++a) {
    for (int b = a + 1; b < n_entities; ++b) {
      const Entity& ea = entity(a);
      const Entity& eb = entity(b);
      if (!ea.movable && !eb.movable) continue;
      const Eigen::Vector2d d = ea.position - eb.position;
      const double dist = d.norm();
      const double pen = ea.radius + eb.radius - dist;
      if (pen <= 0.0) continue;
      const Eigen::Vector2d dir = dist > 1e-9 ? Eigen::Vector2d(d / dist) : Eigen::Vector2d(1.0, 0.0);
      const Eigen::Vector2d f = Physics::contact_k * pen * dir;
      if (ea.movable) force[a] += f;
      if (eb.movable) force[b] -= f;
    }
  }

  // Soft arena boundary.
  for (int e = 0; e < n_entities; ++e) {
    if (!entity(e).movable) continue;
    for (int k = 0; k < 2; ++k) {
      const double x = entity(e).position(k);
      const double excess = std::abs(x) - Physics::arena_half;
      if (excess > 0.0) force[e](k) -= Physics::boundary_k * excess * (x > 0.0 ? 1.0 : -1.0);
    }
  }

  for (int e = 0; e < n_entities; ++e) {
    Entity& ent = entity(e);
    if (!ent.movable) continue;
    ent.velocity = ent.velocity * Physics::damping + force[e] * Physics::dt;
    if (ent.max_speed) {
      const double speed = ent.velocity.norm();
      if (speed > *ent.max_speed) ent.velocity *= *ent.max_speed / speed;
    }
    ent.position += ent.velocity * Physics::dt;
  }

  // Comm emitted now is observed from the next step on.
  w.comm_state.resize(n_agents);
  for (int i = 0; i < n_agents; ++i) w.comm_state[i] = action[i].comm;
  w.t += 1;

  StepOutcome out;
  out.result.rewards = scenario.rewards(w);
  for (int i = 0; i < n_agents; ++i) out.result.observations.push_back(scenario.observe(w, i));
  out.result.done = w.done();
  out.world = std::move(w);
  return out;
}

JointAction joint_action_from_flat(const Scenario& scenario,
                                   const std::vector<Eigen::VectorXd>& flat) {
  if (static_cast<int>(flat.size()) != scenario.num_agents())
    throw DimensionError("joint_action_from_flat: agent count", scenario.num_agents(),
                         static_cast<long>(flat.size()));
  JointAction action(flat.size());
  for (int i = 0; i < scenario.num_agents(); ++i) {
    const ActionSpec spec = scenario.action_spec(i);
    if (flat[i].size() != spec.flat_dim())
      throw DimensionError("joint_action_from_flat: action size for agent " + std::to_string(i),
                           spec.flat_dim(), flat[i].size());
    if (spec.move_dim == 2) action[i].move = flat[i].head<2>();
    action[i].comm = flat[i].tail(spec.comm_dim);
  }
  return action;
}

TrajectoryWriter::TrajectoryWriter(std::ostream& os, const Scenario& scenario)
    : os_(os), scenario_(scenario) {
  os_ << "t";
  // Entity count is fixed per scenario; derive names from a throwaway world.
  SeededRng rng(0);
  const World w = scenario.make_world(rng, 1);
  for (int i = 0; i < w.num_agents(); ++i)
    os_ << ",a" << i << "_px,a" << i << "_py,a" << i << "_vx,a" << i << "_vy";
  for (std::size_t l = 0; l < w.landmarks.size(); ++l)
    os_ << ",l" << l << "_px,l" << l << "_py,l" << l << "_vx,l" << l << "_vy";
  for (int i = 0; i < w.num_agents(); ++i) {
    const ActionSpec spec = scenario.action_spec(i);
    if (spec.move_dim == 2) os_ << ",a" << i << "_fx,a" << i << "_fy";
    for (int c = 0; c < spec.comm_dim; ++c) os_ << ",a" << i << "_comm" << c;
  }
  for (int i = 0; i < w.num_agents(); ++i) os_ << ",r" << i;
  os_ << "\n";
}

void TrajectoryWriter::record(const World& world_before, const JointAction& action,
                              const std::vector<double>& rewards) {
  char buf[32];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os_ << ',' << buf;
  };
  os_ << world_before.t;
  for (const Entity& e : world_before.agents) {
    num(e.position.x());
    num(e.position.y());
    num(e.velocity.x());
    num(e.velocity.y());
  }
  for (const Entity& e : world_before.landmarks) {
    num(e.position.x());
    num(e.position.y());
    num(e.velocity.x());
    num(e.velocity.y());
  }
  for (int i = 0; i < world_before.num_agents(); ++i) {
    const ActionSpec spec = scenario_.action_spec(i);
    if (spec.move_dim == 2) {
      num(action[i].move.x());
      num(action[i].move.y());
    }
    for (int c = 0; c < spec.comm_dim; ++c) num(action[i].comm(c));
  }
  for (const double r : rewards) num(r);
  os_ << "\n";
}

}  // namespace matd3::env
