#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "matd3/marl/bundle_io.hpp"
#include "matd3/marl/train.hpp"
#include "matd3/ops.hpp"

using namespace matd3;
using marl::AgentBundle;
using marl::Algorithm;
using marl::Batch;
using marl::HyperParams;
using marl::ReplayBuffer;
using marl::TeamSpec;
using marl::Transition;

namespace {

/// Single-agent navigation used for the independent-learner degeneracy test
/// and to demonstrate plug-in scenario registration.
class SoloNavigation final : public env::Scenario {
 public:
  std::string id() const override { return "solo_navigation"; }
  int num_agents() const override { return 1; }
  env::ActionSpec action_spec(int) const override { return {2, 0}; }
  int obs_size(int) const override { return 2 + 2 + 2; }

  env::World make_world(SeededRng& rng, int horizon) const override {
    env::World w;
    w.horizon = horizon;
    env::Entity agent;
    agent.position = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    w.agents.push_back(agent);
    env::Entity landmark;
    landmark.position = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    landmark.radius = 0.05;
    landmark.movable = false;
    w.landmarks.push_back(landmark);
    return w;
  }

  Eigen::VectorXd observe(const env::World& w, int) const override {
    Eigen::VectorXd o(6);
    o << w.agents[0].velocity, w.agents[0].position,
        w.landmarks[0].position - w.agents[0].position;
    return o;
  }

  std::vector<double> rewards(const env::World& w) const override {
    return {-(w.landmarks[0].position - w.agents[0].position).norm()};
  }
};

const bool registered = [] {
  env::ScenarioRegistry::instance().add("solo_navigation",
                                        [] { return std::make_shared<const SoloNavigation>(); });
  return true;
}();

Transition make_transition(const TeamSpec& spec, SeededRng& rng, double reward_scale = 1.0,
                           int tag = -1) {
  Transition t;
  t.x = Eigen::VectorXd::Zero(spec.full_obs);
  t.x_next = Eigen::VectorXd::Zero(spec.full_obs);
  for (int i = 0; i < spec.full_obs; ++i) {
    t.x(i) = rng.normal();
    t.x_next(i) = rng.normal();
  }
  for (int a = 0; a < spec.num_agents(); ++a) {
    Eigen::VectorXd act(spec.action_specs[a].flat_dim());
    for (Eigen::Index k = 0; k < act.size(); ++k) act(k) = rng.uniform(-1.0, 1.0);
    if (spec.action_specs[a].comm_dim > 0) {
      const Eigen::VectorXd logits = act.tail(spec.action_specs[a].comm_dim);
      act.tail(spec.action_specs[a].comm_dim) = nn::softmax<double>(logits);
    }
    t.actions.push_back(act);
    t.rewards.push_back(tag >= 0 ? static_cast<double>(tag) : reward_scale * rng.normal());
  }
  return t;
}

Batch random_batch(const TeamSpec& spec, int size, SeededRng& rng) {
  ReplayBuffer buffer(size);
  for (int i = 0; i < size; ++i) buffer.push(make_transition(spec, rng));
  std::vector<std::size_t> idx(size);
  for (int i = 0; i < size; ++i) idx[i] = i;
  return gather_batch(buffer, idx, spec);
}

/// Constant-valued critic: zero weights, output bias fixed.
void make_constant(nn::DenseNetd& net, double value) {
  for (auto& w : net.weights) w.setZero();
  for (auto& b : net.biases) b.setZero();
  net.biases.back()(0) = value;
}

bool nets_equal(const nn::DenseNetd& a, const nn::DenseNetd& b) {
  for (int k = 0; k < a.num_layers(); ++k)
    if (a.weights[k] != b.weights[k] || a.biases[k] != b.biases[k]) return false;
  return true;
}

HyperParams small_hp() {
  HyperParams hp;
  hp.hidden_units = 8;
  hp.batch_size = 4;
  hp.buffer_capacity = 4096;
  return hp;
}

}  // namespace

TEST_CASE("replay: eviction drops the oldest first and keeps order (capacity <= 64)") {
  for (std::size_t capacity = 1; capacity <= 64; ++capacity) {
    ReplayBuffer buffer(capacity);
    const TeamSpec spec = TeamSpec::from(*env::ScenarioRegistry::instance().create("solo_navigation"));
    SeededRng rng(capacity);
    const std::size_t pushes = capacity + 17;
    for (std::size_t i = 0; i < pushes; ++i)
      buffer.push(make_transition(spec, rng, 1.0, static_cast<int>(i)));
    CHECK(buffer.size() == capacity);
    CHECK(buffer.total_written() == pushes);
    for (std::size_t i = 0; i < capacity; ++i) {
      const double tag = buffer[i].rewards[0];
      CHECK(tag == static_cast<double>(pushes - capacity + i));  // oldest k gone, order kept
    }
  }
}

TEST_CASE("replay: minibatch indices are distinct and in range (capacity <= 64)") {
  const TeamSpec spec = TeamSpec::from(*env::ScenarioRegistry::instance().create("solo_navigation"));
  SeededRng fill(1);
  for (std::size_t capacity = 1; capacity <= 64; ++capacity) {
    ReplayBuffer buffer(capacity);
    for (std::size_t i = 0; i < capacity; ++i) buffer.push(make_transition(spec, fill));
    SeededRng rng(capacity * 7 + 1);
    for (std::size_t batch = 1; batch <= capacity; ++batch) {
      const auto idx = buffer.sample_indices(batch, rng);
      REQUIRE(idx.size() == batch);
      std::set<std::size_t> distinct(idx.begin(), idx.end());
      CHECK(distinct.size() == batch);
      for (const auto i : idx) CHECK(i < capacity);
    }
    CHECK_THROWS_AS(buffer.sample_indices(capacity + 1, rng), Error);
  }
}

TEST_CASE("replay: resident_since windows and at_seq") {
  const TeamSpec spec = TeamSpec::from(*env::ScenarioRegistry::instance().create("solo_navigation"));
  SeededRng rng(2);
  ReplayBuffer buffer(8);
  for (int i = 0; i < 6; ++i) buffer.push(make_transition(spec, rng, 1.0, i));
  CHECK(buffer.resident_since(0).size() == 6);
  CHECK(buffer.resident_since(4) == std::vector<std::uint64_t>{4, 5});
  CHECK(buffer.at_seq(3).rewards[0] == 3.0);
  for (int i = 6; i < 12; ++i) buffer.push(make_transition(spec, rng, 1.0, i));
  // Seqs 0..3 were overwritten; the window clips to what is resident.
  CHECK(buffer.resident_since(0).front() == 4);
  CHECK_THROWS_AS(buffer.at_seq(2), Error);
}

TEST_CASE("make_bundles: shapes per variant") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  const auto matd3 = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(3));
  REQUIRE(matd3.size() == 3);
  CHECK(matd3[0].twin());
  CHECK(matd3[0].critic_input_dim == 3 * 14 + 3 * 2);
  CHECK(matd3[0].policy.output_activation == nn::OutputActivation::kSigmoidScaled);
  CHECK(nets_equal(matd3[0].policy, matd3[0].policy_target));
  CHECK(nets_equal(matd3[0].critic1, matd3[0].critic1_target));

  const auto maddpg = marl::make_bundles(*nav, Algorithm::kMaddpg, hp, SeededRng(3));
  CHECK(!maddpg[0].twin());

  const auto il = marl::make_bundles(*nav, Algorithm::kIlTd3, hp, SeededRng(3));
  CHECK(il[0].twin());
  CHECK(!il[0].centralized);
  CHECK(il[0].critic_input_dim == 14 + 2);  // |o_i| + |a_i|

  const auto comm = env::ScenarioRegistry::instance().create("cooperative_communication");
  const auto cb = marl::make_bundles(*comm, Algorithm::kMatd3, hp, SeededRng(3));
  CHECK(cb[0].policy.output_activation == nn::OutputActivation::kIdentity);  // comm head
  CHECK(cb[0].policy.output_size() == 3);
  CHECK(cb[1].policy.output_size() == 2);
}

TEST_CASE("select_actions: zero noise reproduces the policy output, bounds always hold") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  const auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(5));
  SeededRng rng(6);
  std::vector<Eigen::VectorXd> obs;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd o(14);
    for (int k = 0; k < 14; ++k) o(k) = rng.normal();
    obs.push_back(o);
  }
  SeededRng r1(7);
  const auto actions = marl::select_actions(bundles, obs, 0.0, hp.gumbel_temperature, r1);
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd raw = nn::forward_value(bundles[i].policy, obs[i]);
    CHECK((actions[i] - raw).cwiseAbs().maxCoeff() == 0.0);
  }
  // Large noise still lands inside the action box.
  for (int trial = 0; trial < 200; ++trial) {
    const auto noisy = marl::select_actions(bundles, obs, 5.0, hp.gumbel_temperature, r1);
    for (const auto& a : noisy)
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        CHECK(a(k) >= -1.0);
        CHECK(a(k) <= 1.0);
      }
  }
  // Determinism: identical streams, identical actions.
  SeededRng ra(8), rb(8);
  const auto a1 = marl::select_actions(bundles, obs, 0.3, hp.gumbel_temperature, ra);
  const auto a2 = marl::select_actions(bundles, obs, 0.3, hp.gumbel_temperature, rb);
  for (int i = 0; i < 3; ++i) CHECK(a1[i] == a2[i]);
}

TEST_CASE("targets: gamma = 0 reduces to the reward") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  HyperParams hp = small_hp();
  hp.gamma = 1e-300;  // gamma must be positive; the product underflows to the reward
  auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(9));
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(10);
  const Batch batch = random_batch(spec, 6, rng);
  SeededRng noise(11);
  const Eigen::VectorXd y = marl::matd3_critic_target(bundles, 0, batch, spec, hp, noise);
  CHECK((y - batch.rewards[0]).cwiseAbs().maxCoeff() < 1e-280);
}

TEST_CASE("targets: constant twin critics produce r + gamma * min(q1, q2)") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  HyperParams hp = small_hp();
  hp.gamma = 0.95;
  auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(12));
  make_constant(bundles[0].critic1_target, 2.0);
  make_constant(*bundles[0].critic2_target, 5.0);
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(13);
  Batch batch = random_batch(spec, 5, rng);
  batch.rewards[0].setConstant(1.0);
  SeededRng noise(14);
  const Eigen::VectorXd y = marl::matd3_critic_target(bundles, 0, batch, spec, hp, noise);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    CHECK(y(i) == doctest::Approx(1.0 + 0.95 * 2.0).epsilon(1e-15));
}

TEST_CASE("targets: done transitions bootstrap nothing") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(15));
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(16);
  Batch batch = random_batch(spec, 4, rng);
  batch.done.setConstant(1.0);
  SeededRng noise(17);
  const Eigen::VectorXd y = marl::matd3_critic_target(bundles, 1, batch, spec, hp, noise);
  CHECK((y - batch.rewards[1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("targets: variant mismatch raises both ways") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto matd3 = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(18));
  auto maddpg = marl::make_bundles(*nav, Algorithm::kMaddpg, hp, SeededRng(18));
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(19);
  const Batch batch = random_batch(spec, 3, rng);
  SeededRng noise(20);
  CHECK_THROWS_AS(marl::matd3_critic_target(maddpg, 0, batch, spec, hp, noise), Error);
  CHECK_THROWS_AS(marl::maddpg_critic_target(matd3, 0, batch, spec, hp), Error);
}

TEST_CASE("targets: matd3 with sigma=c=0 and identical twins equals maddpg to 1e-12") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  HyperParams hp = small_hp();
  hp.smoothing_sigma = 0.0;
  hp.smoothing_clip = 0.0;
  // Identical seeds make policy/critic1 identical across variants.
  auto matd3 = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(21));
  auto maddpg = marl::make_bundles(*nav, Algorithm::kMaddpg, hp, SeededRng(21));
  for (int i = 0; i < 3; ++i) {
    matd3[i].critic2 = matd3[i].critic1;
    matd3[i].critic2_target = matd3[i].critic1_target;
    REQUIRE(nets_equal(matd3[i].critic1, maddpg[i].critic1));
  }
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const Batch batch = random_batch(spec, 8, rng);
    for (int agent = 0; agent < 3; ++agent) {
      SeededRng noise(trial);
      const Eigen::VectorXd ym = marl::matd3_critic_target(matd3, agent, batch, spec, hp, noise);
      const Eigen::VectorXd yd = marl::maddpg_critic_target(maddpg, agent, batch, spec, hp);
      CHECK((ym - yd).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("targets: the twin minimum never exceeds either single-critic target") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto both = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(23));
  auto only1 = both;
  auto only2 = both;
  for (int i = 0; i < 3; ++i) {
    only1[i].critic2 = only1[i].critic1;
    only1[i].critic2_target = only1[i].critic1_target;
    only2[i].critic1 = *only2[i].critic2;
    only2[i].critic1_target = *only2[i].critic2_target;
  }
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const Batch batch = random_batch(spec, 6, rng);
    // Identical noise streams isolate the min.
    SeededRng n0(trial), n1(trial), n2(trial);
    const Eigen::VectorXd y = marl::matd3_critic_target(both, 0, batch, spec, hp, n0);
    const Eigen::VectorXd y1 = marl::matd3_critic_target(only1, 0, batch, spec, hp, n1);
    const Eigen::VectorXd y2 = marl::matd3_critic_target(only2, 0, batch, spec, hp, n2);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      CHECK(y(i) <= y1(i) + 1e-12);
      CHECK(y(i) <= y2(i) + 1e-12);
      CHECK(y(i) == doctest::Approx(std::min(y1(i), y2(i))).epsilon(1e-12));
    }
  }
}

TEST_CASE("critic_update: already-fitted critic has zero loss and does not move") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(25));
  make_constant(bundles[0].critic1, 3.25);
  make_constant(*bundles[0].critic2, 3.25);
  const nn::DenseNetd before = bundles[0].critic1;
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(26);
  const Batch batch = random_batch(spec, 5, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(5, 3.25);
  const auto losses = marl::critic_update(bundles[0], 0, batch, y, spec, hp);
  CHECK(losses.critic1 == 0.0);
  CHECK(losses.critic2 == 0.0);
  CHECK(nets_equal(bundles[0].critic1, before));
}

TEST_CASE("critic_update: loss equals the scalar mean of squared residuals") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto bundles = marl::make_bundles(*nav, Algorithm::kMaddpg, hp, SeededRng(27));
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(28);
  const Batch batch = random_batch(spec, 7, rng);
  Eigen::VectorXd y(7);
  for (int i = 0; i < 7; ++i) y(i) = rng.normal();

  // Oracle: naive per-sample forward and mean of squared residuals.
  double expected = 0.0;
  for (int b = 0; b < 7; ++b) {
    Eigen::VectorXd z(bundles[1].critic_input_dim);
    z.head(spec.full_obs) = batch.x.col(b);
    int at = spec.full_obs;
    for (int j = 0; j < 3; ++j) {
      z.segment(at, 2) = batch.actions[j].col(b);
      at += 2;
    }
    const double q = nn::forward_value(bundles[1].critic1, z)(0);
    expected += (q - y(b)) * (q - y(b));
  }
  expected /= 7.0;
  const auto losses = marl::critic_update(bundles[1], 1, batch, y, spec, hp);
  CHECK(losses.critic1 == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::isnan(losses.critic2));
}

TEST_CASE("critic_update: one small step reduces the loss") {
  const auto solo = env::ScenarioRegistry::instance().create("solo_navigation");
  HyperParams hp = small_hp();
  hp.lr = 1e-3;
  auto bundles = marl::make_bundles(*solo, Algorithm::kMatd3, hp, SeededRng(29));
  const TeamSpec spec = TeamSpec::from(*solo);
  SeededRng rng(30);
  const Batch batch = random_batch(spec, 1, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.7);
  const double before = marl::critic_update(bundles[0], 0, batch, y, spec, hp).critic1;
  const double after = marl::critic_update(bundles[0], 0, batch, y, spec, hp).critic1;
  CHECK(after < before);
}

TEST_CASE("critic_update: non-finite targets abort with batch diagnostics") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(31));
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(32);
  const Batch batch = random_batch(spec, 3, rng);
  Eigen::VectorXd y(3);
  y << 0.0, std::numeric_limits<double>::infinity(), 1.0;
  try {
    marl::critic_update(bundles[0], 0, batch, y, spec, hp);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("column 1") != std::string::npos);
  }
}

namespace {

/// Independent objective oracle: evaluates
/// J = mean_b Q_1(x^b, a_others^b, mu(o^b)) from first principles and
/// records the ReLU sign pattern of both networks. Central differences are
/// only trusted on parameters that do not flip any sign on the +-h interval.
struct PolicyObjectiveOracle {
  const AgentBundle* bundle;
  int agent;
  const Batch* batch;
  const TeamSpec* spec;
  const HyperParams* hp;

  std::pair<double, std::vector<char>> eval(const nn::DenseNetd& policy) const {
    const Eigen::MatrixXd obs =
        batch->x.middleRows(spec->obs_offset[agent], spec->obs_size[agent]);
    const auto [raw, pcache] = nn::forward_batch(policy, obs);
    Eigen::MatrixXd own = raw;
    const int comm = bundle->action_spec.comm_dim;
    if (comm > 0)
      for (Eigen::Index c = 0; c < raw.cols(); ++c)
        own.col(c).tail(comm) =
            nn::relaxed_onehot<double>(Eigen::VectorXd(raw.col(c).tail(comm)),
                                       hp->gumbel_temperature);
    std::vector<Eigen::MatrixXd> actions = batch->actions;
    actions[agent] = own;
    const Eigen::MatrixXd z = marl::critic_input(*bundle, agent, batch->x, actions, *spec);
    const auto [q, ccache] = nn::forward_batch(bundle->critic1, z);

    std::vector<char> mask;
    for (const auto* cache : {&pcache, &ccache})
      for (std::size_t layer = 0; layer + 1 < cache->pre.size(); ++layer)
        for (Eigen::Index i = 0; i < cache->pre[layer].size(); ++i)
          mask.push_back(cache->pre[layer].reshaped()(i) > 0.0 ? 1 : 0);
    return {q.row(0).mean(), std::move(mask)};
  }
};

}  // namespace

TEST_CASE("policy gradient matches finite differences (movement and comm heads)") {
  for (const std::string id : {"cooperative_navigation", "cooperative_communication"}) {
    const auto scenario = env::ScenarioRegistry::instance().create(id);
    HyperParams hp = small_hp();
    hp.hidden_units = 6;
    auto bundles = marl::make_bundles(*scenario, Algorithm::kMatd3, hp, SeededRng(33));
    const TeamSpec spec = TeamSpec::from(*scenario);
    SeededRng rng(34);
    const Batch batch = random_batch(spec, 6, rng);
    for (int agent = 0; agent < scenario->num_agents(); ++agent) {
      const auto pg = marl::policy_objective_gradient(bundles[agent], agent, batch, spec, hp);
      const PolicyObjectiveOracle oracle{&bundles[agent], agent, &batch, &spec, &hp};
      CHECK(pg.objective ==
            doctest::Approx(oracle.eval(bundles[agent].policy).first).epsilon(1e-12));

      std::vector<double> flat;
      nn::for_each_grad(pg.grads, [&](double v) { flat.push_back(v); });
      nn::DenseNetd policy = bundles[agent].policy;
      std::vector<double*> params;
      nn::for_each_param(policy, [&](double& v) { params.push_back(&v); });
      REQUIRE(params.size() == flat.size());
      const double h = 1e-5;
      double max_rel = 0.0;
      std::size_t skipped = 0;
      for (std::size_t p = 0; p < params.size(); ++p) {
        const double saved = *params[p];
        *params[p] = saved + h;
        const auto [up, mask_up] = oracle.eval(policy);
        *params[p] = saved - h;
        const auto [down, mask_down] = oracle.eval(policy);
        *params[p] = saved;
        if (mask_up != mask_down) {
          ++skipped;  // a ReLU kink sits inside the interval
          continue;
        }
        const double fd = (up - down) / (2.0 * h);
        const double scale = std::max(std::abs(fd), std::abs(flat[p]));
        // Below ~1e-6 central differences on an O(1) objective are dominated
        // by cancellation noise; such entries are held to an absolute bound.
        if (scale < 1e-6) {
          CHECK(std::abs(fd - flat[p]) < 1e-8);
          continue;
        }
        max_rel = std::max(max_rel, std::abs(fd - flat[p]) / scale);
      }
      CHECK(max_rel < 1e-5);
      CHECK(skipped < params.size() / 10);
    }
  }
}

TEST_CASE("policy_update: constant critic means zero gradient; isolation holds") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(35));
  make_constant(bundles[0].critic1, 1.5);
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(36);
  const Batch batch = random_batch(spec, 4, rng);
  marl::UpdateClock clock;
  clock.critic_updates = 2;
  const auto others_before = std::make_pair(bundles[1].policy, bundles[2].policy);
  const double norm = marl::policy_update(bundles[0], 0, batch, spec, hp, clock);
  CHECK(norm == 0.0);
  CHECK(nets_equal(bundles[1].policy, others_before.first));
  CHECK(nets_equal(bundles[2].policy, others_before.second));
}

TEST_CASE("policy_update: clock violations are rejected") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  HyperParams hp = small_hp();
  hp.policy_delay = 2;
  auto bundles = marl::make_bundles(*nav, Algorithm::kMatd3, hp, SeededRng(37));
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(38);
  const Batch batch = random_batch(spec, 4, rng);
  marl::UpdateClock clock;
  clock.critic_updates = 3;  // 3 mod 2 != 0
  CHECK_THROWS_AS(marl::policy_update(bundles[0], 0, batch, spec, hp, clock), Error);
}

TEST_CASE("il_td3: critic ignores other agents' actions") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  const HyperParams hp = small_hp();
  auto bundles = marl::make_bundles(*nav, Algorithm::kIlTd3, hp, SeededRng(39));
  const TeamSpec spec = TeamSpec::from(*nav);
  SeededRng rng(40);
  Batch batch = random_batch(spec, 5, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(5, 0.3);

  auto copy_a = bundles;
  const auto loss_a = marl::critic_update(copy_a[0], 0, batch, y, spec, hp);
  batch.actions[1].setRandom();
  batch.actions[2].setRandom();
  auto copy_b = bundles;
  const auto loss_b = marl::critic_update(copy_b[0], 0, batch, y, spec, hp);
  CHECK(loss_a.critic1 == loss_b.critic1);
  CHECK(loss_a.critic2 == loss_b.critic2);
  CHECK(nets_equal(copy_a[0].critic1, copy_b[0].critic1));
}

TEST_CASE("il_td3: with one agent the independent learner equals matd3 to 1e-12") {
  const auto solo = env::ScenarioRegistry::instance().create("solo_navigation");
  HyperParams hp = small_hp();
  hp.episodes = 50;
  hp.steps_per_episode = 25;
  hp.batch_size = 16;
  hp.buffer_capacity = 2048;
  const auto a = marl::train(*solo, Algorithm::kMatd3, hp, 77);
  const auto b = marl::train(*solo, Algorithm::kIlTd3, hp, 77);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].episodic_reward == doctest::Approx(b.metrics[i].episodic_reward).epsilon(1e-12));
    if (!std::isnan(a.metrics[i].critic_loss_1))
      CHECK(a.metrics[i].critic_loss_1 == doctest::Approx(b.metrics[i].critic_loss_1).epsilon(1e-12));
  }
  for (int k = 0; k < a.bundles[0].policy.num_layers(); ++k)
    CHECK((a.bundles[0].policy.weights[k] - b.bundles[0].policy.weights[k]).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("train: update clock bookkeeping for d in {1,2,3}") {
  const auto solo = env::ScenarioRegistry::instance().create("solo_navigation");
  for (const int d : {1, 2, 3}) {
    HyperParams hp = small_hp();
    hp.policy_delay = d;
    hp.batch_size = 8;
    hp.episodes = 160;  // 160 * 7 = 1120 steps; warmup 1024 -> 96 learning rounds
    hp.steps_per_episode = 7;
    const auto result = marl::train(*solo, Algorithm::kMatd3, hp, 5);
    CHECK(result.clock.critic_updates == 1120 - 1024 + 1);
    CHECK(result.clock.invariant_holds(d));
    CHECK(result.clock.policy_updates == result.clock.critic_updates / d);
    // Metrics rows carry the same counters.
    CHECK(result.metrics.back().critic_updates == result.clock.critic_updates);
    CHECK(result.metrics.back().policy_updates == result.clock.policy_updates);
  }
}

TEST_CASE("train: d=2 with exactly 1000 learning rounds gives 500 policy updates") {
  const auto solo = env::ScenarioRegistry::instance().create("solo_navigation");
  HyperParams hp = small_hp();
  hp.policy_delay = 2;
  hp.batch_size = 8;
  hp.steps_per_episode = 7;
  hp.episodes = 289;  // 2023 steps -> 2023 - 1024 + 1 = 1000 rounds
  const auto result = marl::train(*solo, Algorithm::kMatd3, hp, 6);
  CHECK(result.clock.critic_updates == 1000);
  CHECK(result.clock.policy_updates == 500);
}

TEST_CASE("train: two runs with the same seed emit byte-identical metrics") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  HyperParams hp = small_hp();
  hp.episodes = 12;
  hp.steps_per_episode = 10;
  hp.batch_size = 4;
  const auto a = marl::train(*nav, Algorithm::kMatd3, hp, 123);
  const auto b = marl::train(*nav, Algorithm::kMatd3, hp, 123);
  std::ostringstream csv_a, csv_b;
  marl::write_metrics_csv(csv_a, a.metrics, "# header");
  marl::write_metrics_csv(csv_b, b.metrics, "# header");
  CHECK(csv_a.str() == csv_b.str());
  const auto c = marl::train(*nav, Algorithm::kMatd3, hp, 124);
  std::ostringstream csv_c;
  marl::write_metrics_csv(csv_c, c.metrics, "# header");
  CHECK(csv_a.str() != csv_c.str());
}

TEST_CASE("train: cooperative agents log identical episodic returns") {
  const auto nav = env::ScenarioRegistry::instance().create("cooperative_navigation");
  HyperParams hp = small_hp();
  hp.episodes = 8;
  hp.steps_per_episode = 12;
  const auto result = marl::train(*nav, Algorithm::kMaddpg, hp, 9);
  for (std::size_t i = 0; i < result.metrics.size(); i += 3) {
    CHECK(result.metrics[i].episodic_reward == result.metrics[i + 1].episodic_reward);
    CHECK(result.metrics[i].episodic_reward == result.metrics[i + 2].episodic_reward);
  }
}

TEST_CASE("train: targets only move through soft updates") {
  const auto solo = env::ScenarioRegistry::instance().create("solo_navigation");
  HyperParams hp = small_hp();
  hp.policy_delay = 1000000;  // no policy/target rounds inside this run
  hp.batch_size = 8;
  hp.episodes = 150;
  hp.steps_per_episode = 7;
  const auto initial = marl::make_bundles(*solo, Algorithm::kMatd3, hp, SeededRng(11).fork("init"));
  const auto result = marl::train(*solo, Algorithm::kMatd3, hp, 11);
  CHECK(result.clock.policy_updates == 0);
  CHECK(result.clock.critic_updates > 0);
  // Critics trained, their targets still bitwise equal to initialization.
  CHECK(!nets_equal(result.bundles[0].critic1, initial[0].critic1));
  CHECK(nets_equal(result.bundles[0].critic1_target, initial[0].critic1_target));
  CHECK(nets_equal(result.bundles[0].policy_target, initial[0].policy_target));
}

TEST_CASE("metrics csv: documented column order") {
  std::ostringstream os;
  marl::write_metrics_csv(os, {}, "");
  CHECK(os.str() ==
        "episode,step,agent,episodic_reward,critic_loss_1,critic_loss_2,policy_grad_norm,"
        "critic_updates,policy_updates\n");
}

TEST_CASE("bundle checkpoint: bit-exact round-trip through save/load") {
  const auto comm = env::ScenarioRegistry::instance().create("cooperative_communication");
  HyperParams hp = small_hp();
  hp.episodes = 6;
  hp.steps_per_episode = 8;
  const auto result = marl::train(*comm, Algorithm::kMatd3, hp, 21);
  for (const AgentBundle& b : result.bundles) {
    std::stringstream ss;
    marl::save_bundle(ss, b);
    const AgentBundle loaded = marl::load_bundle(ss);
    CHECK(loaded.centralized == b.centralized);
    CHECK(loaded.twin() == b.twin());
    CHECK(loaded.action_spec.comm_dim == b.action_spec.comm_dim);
    CHECK(nets_equal(loaded.policy, b.policy));
    CHECK(nets_equal(loaded.policy_target, b.policy_target));
    CHECK(nets_equal(loaded.critic1, b.critic1));
    CHECK(loaded.critic1_adam.t == b.critic1_adam.t);
    CHECK(loaded.critic1_adam.m_w[0] == b.critic1_adam.m_w[0]);
    if (b.twin()) CHECK(nets_equal(*loaded.critic2, *b.critic2));
    std::stringstream again;
    marl::save_bundle(again, loaded);
    CHECK(ss.str() == again.str());
  }
}
