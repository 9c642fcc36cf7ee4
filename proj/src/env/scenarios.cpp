#include <cmath>

#include "matd3/env/scenario.hpp"

namespace matd3::env {

namespace {

constexpr double kAgentRadius = 0.1;
constexpr double kPreyRadius = 0.075;
constexpr double kLandmarkRadius = 0.05;

/// Uniform placement in [-1,1]^2 with rejection: every pair keeps at least
/// 90% of its radius sum.
std::vector<Eigen::Vector2d> place_entities(SeededRng& rng, const std::vector<double>& radii) {
  std::vector<Eigen::Vector2d> pos;
  pos.reserve(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const Eigen::Vector2d p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      bool ok = true;
      for (std::size_t j = 0; j < pos.size(); ++j) {
        if ((p - pos[j]).norm() < 0.9 * (radii[i] + radii[j])) {
          ok = false;
          break;
        }
      }
      if (ok) {
        pos.push_back(p);
        placed = true;
        break;
      }
    }
    if (!placed) throw Error("place_entities: could not find a non-overlapping placement");
  }
  return pos;
}

double dist(const Entity& a, const Entity& b) { return (a.position - b.position).norm(); }

bool touching(const Entity& a, const Entity& b) { return dist(a, b) < a.radius + b.radius; }

void append(Eigen::VectorXd& v, Eigen::Index& at, const Eigen::Vector2d& x) {
  v(at++) = x.x();
  v(at++) = x.y();
}

class CooperativeNavigation final : public Scenario {
 public:
  std::string id() const override { return "cooperative_navigation"; }
  int num_agents() const override { return 3; }
  ActionSpec action_spec(int) const override { return {2, 0}; }
  // own velocity, own position, 3 landmark offsets, 2 other-agent offsets
  int obs_size(int) const override { return 2 + 2 + 3 * 2 + 2 * 2; }

  World make_world(SeededRng& rng, int horizon) const override {
    World w;
    w.horizon = horizon;
    const std::vector<double> radii = {kAgentRadius, kAgentRadius, kAgentRadius,
                                       kLandmarkRadius, kLandmarkRadius, kLandmarkRadius};
    const auto pos = place_entities(rng, radii);
    for (int i = 0; i < 3; ++i) {
      Entity a;
      a.position = pos[i];
      a.radius = kAgentRadius;
      w.agents.push_back(a);
    }
    for (int l = 0; l < 3; ++l) {
      Entity e;
      e.position = pos[3 + l];
      e.radius = kLandmarkRadius;
      e.movable = false;
      w.landmarks.push_back(e);
    }
    return w;
  }

  Eigen::VectorXd observe(const World& w, int agent) const override {
    const Entity& self = w.agents[agent];
    Eigen::VectorXd o(obs_size(agent));
    Eigen::Index at = 0;
    append(o, at, self.velocity);
    append(o, at, self.position);
    for (const Entity& l : w.landmarks) append(o, at, l.position - self.position);
    for (int j = 0; j < w.num_agents(); ++j)
      if (j != agent) append(o, at, w.agents[j].position - self.position);
    return o;
  }

  std::vector<double> rewards(const World& w) const override {
    double r = 0.0;
    for (const Entity& l : w.landmarks) {
      double best = std::numeric_limits<double>::infinity();
      for (const Entity& a : w.agents) best = std::min(best, dist(a, l));
      r -= best;
    }
    for (int i = 0; i < w.num_agents(); ++i)
      for (int j = i + 1; j < w.num_agents(); ++j)
        if (touching(w.agents[i], w.agents[j])) r -= 1.0;
    return std::vector<double>(w.num_agents(), r);
  }
};

/// Speaker (agent 0, immobile, 3-way channel) tells the listener (agent 1)
/// which of three colored landmarks to reach.
class CooperativeCommunication final : public Scenario {
 public:
  std::string id() const override { return "cooperative_communication"; }
  int num_agents() const override { return 2; }
  ActionSpec action_spec(int agent) const override {
    return agent == 0 ? ActionSpec{0, 3} : ActionSpec{2, 0};
  }
  // speaker: own velocity, own position, goal color one-hot
  // listener: own velocity, own position, 3 landmark offsets, received comm
  int obs_size(int agent) const override { return agent == 0 ? 2 + 2 + 3 : 2 + 2 + 3 * 2 + 3; }

  World make_world(SeededRng& rng, int horizon) const override {
    World w;
    w.horizon = horizon;
    const std::vector<double> radii = {kAgentRadius, kAgentRadius, kLandmarkRadius,
                                       kLandmarkRadius, kLandmarkRadius};
    const auto pos = place_entities(rng, radii);
    Entity speaker;
    speaker.position = pos[0];
    speaker.radius = kAgentRadius;
    speaker.movable = false;
    w.agents.push_back(speaker);
    Entity listener;
    listener.position = pos[1];
    listener.radius = kAgentRadius;
    w.agents.push_back(listener);
    for (int l = 0; l < 3; ++l) {
      Entity e;
      e.position = pos[2 + l];
      e.radius = kLandmarkRadius;
      e.movable = false;
      e.color_tag = l;
      w.landmarks.push_back(e);
    }
    w.target_index = static_cast<int>(rng.uniform_int(3));
    return w;
  }

  Eigen::VectorXd observe(const World& w, int agent) const override {
    const Entity& self = w.agents[agent];
    Eigen::VectorXd o(obs_size(agent));
    Eigen::Index at = 0;
    append(o, at, self.velocity);
    append(o, at, self.position);
    if (agent == 0) {
      for (int c = 0; c < 3; ++c) o(at++) = c == w.target_index ? 1.0 : 0.0;
    } else {
      for (const Entity& l : w.landmarks) append(o, at, l.position - self.position);
      const Eigen::VectorXd& heard = w.comm_state[0];
      for (Eigen::Index c = 0; c < 3; ++c) o(at++) = heard.size() == 3 ? heard(c) : 0.0;
    }
    return o;
  }

  std::vector<double> rewards(const World& w) const override {
    const double r = -dist(w.agents[1], w.landmarks[w.target_index]);
    return {r, r};
  }
};

/// Three slower predators chase one faster prey around two fixed obstacles.
/// The competitive score (contact bonus plus closing-distance shaping) is
/// credited to every predator and debited from the prey, so each
/// predator/prey pair sums to zero.
class PredatorPrey final : public Scenario {
 public:
  std::string id() const override { return "predator_prey"; }
  int num_agents() const override { return 4; }
  ActionSpec action_spec(int) const override { return {2, 0}; }
  // own velocity, own position, 2 landmark offsets, 3 other-agent offsets,
  // 3 other-agent velocities
  int obs_size(int) const override { return 2 + 2 + 2 * 2 + 3 * 2 + 3 * 2; }

  World make_world(SeededRng& rng, int horizon) const override {
    World w;
    w.horizon = horizon;
    const std::vector<double> radii = {kAgentRadius, kAgentRadius, kAgentRadius, kPreyRadius,
                                       kLandmarkRadius, kLandmarkRadius};
    const auto pos = place_entities(rng, radii);
    for (int i = 0; i < 3; ++i) {
      Entity p;
      p.position = pos[i];
      p.radius = kAgentRadius;
      p.max_speed = 1.0;
      w.agents.push_back(p);
    }
    Entity prey;
    prey.position = pos[3];
    prey.radius = kPreyRadius;
    prey.max_speed = 1.3;
    w.agents.push_back(prey);
    for (int l = 0; l < 2; ++l) {
      Entity e;
      e.position = pos[4 + l];
      e.radius = kLandmarkRadius;
      e.movable = false;
      w.landmarks.push_back(e);
    }
    return w;
  }

  Eigen::VectorXd observe(const World& w, int agent) const override {
    const Entity& self = w.agents[agent];
    Eigen::VectorXd o(obs_size(agent));
    Eigen::Index at = 0;
    append(o, at, self.velocity);
    append(o, at, self.position);
    for (const Entity& l : w.landmarks) append(o, at, l.position - self.position);
    for (int j = 0; j < w.num_agents(); ++j)
      if (j != agent) append(o, at, w.agents[j].position - self.position);
    for (int j = 0; j < w.num_agents(); ++j)
      if (j != agent) append(o, at, w.agents[j].velocity);
    return o;
  }

  std::vector<double> rewards(const World& w) const override {
    const Entity& prey = w.agents[3];
    int contacts = 0;
    double closest = std::numeric_limits<double>::infinity();
    for (int p = 0; p < 3; ++p) {
      if (touching(w.agents[p], prey)) ++contacts;
      closest = std::min(closest, dist(w.agents[p], prey));
    }
    const double score = 10.0 * contacts - 0.5 * closest;
    return {score, score, score, -score};
  }
};

/// Two cooperators cover two landmarks, only they know which one is the
/// target; the adversary is rewarded for guessing it.
class PhysicalDeception final : public Scenario {
 public:
  std::string id() const override { return "physical_deception"; }
  int num_agents() const override { return 3; }
  ActionSpec action_spec(int) const override { return {2, 0}; }
  // own velocity, own position, 2 landmark offsets, 2 other-agent offsets,
  // cooperators additionally get the target one-hot
  int obs_size(int agent) const override {
    return agent < 2 ? 2 + 2 + 2 * 2 + 2 * 2 + 2 : 2 + 2 + 2 * 2 + 2 * 2;
  }

  World make_world(SeededRng& rng, int horizon) const override {
    World w;
    w.horizon = horizon;
    const std::vector<double> radii = {kAgentRadius, kAgentRadius, kAgentRadius, kLandmarkRadius,
                                       kLandmarkRadius};
    const auto pos = place_entities(rng, radii);
    for (int i = 0; i < 3; ++i) {
      Entity a;
      a.position = pos[i];
      a.radius = kAgentRadius;
      w.agents.push_back(a);
    }
    for (int l = 0; l < 2; ++l) {
      Entity e;
      e.position = pos[3 + l];
      e.radius = kLandmarkRadius;
      e.movable = false;
      e.color_tag = l;
      w.landmarks.push_back(e);
    }
    w.target_index = static_cast<int>(rng.uniform_int(2));
    return w;
  }

  Eigen::VectorXd observe(const World& w, int agent) const override {
    const Entity& self = w.agents[agent];
    Eigen::VectorXd o(obs_size(agent));
    Eigen::Index at = 0;
    append(o, at, self.velocity);
    append(o, at, self.position);
    for (const Entity& l : w.landmarks) append(o, at, l.position - self.position);
    for (int j = 0; j < w.num_agents(); ++j)
      if (j != agent) append(o, at, w.agents[j].position - self.position);
    if (agent < 2)
      for (int c = 0; c < 2; ++c) o(at++) = c == w.target_index ? 1.0 : 0.0;
    return o;
  }

  std::vector<double> rewards(const World& w) const override {
    const Entity& target = w.landmarks[w.target_index];
    const double adv_dist = dist(w.agents[2], target);
    const double coop_dist = std::min(dist(w.agents[0], target), dist(w.agents[1], target));
    const double coop_r = -coop_dist + adv_dist;
    return {coop_r, coop_r, -adv_dist};
  }
};

}  // namespace

void register_builtin_scenarios(ScenarioRegistry& registry) {
  registry.add("cooperative_navigation",
               [] { return std::make_shared<const CooperativeNavigation>(); });
  registry.add("cooperative_communication",
               [] { return std::make_shared<const CooperativeCommunication>(); });
  registry.add("predator_prey", [] { return std::make_shared<const PredatorPrey>(); });
  registry.add("physical_deception", [] { return std::make_shared<const PhysicalDeception>(); });
}

}  // namespace matd3::env
