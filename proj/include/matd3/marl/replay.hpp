#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "matd3/env/world.hpp"
#include "matd3/errors.hpp"
#include "matd3/rng.hpp"

namespace matd3::marl {

/// One stored step: concatenated full-state observation x, every agent's
/// executed flat action, every reward, the successor state x' and the
/// absorbing-terminal flag. done refers to true termination; horizon
/// truncation is stored with done = false so targets bootstrap through it.
/// The pre-step world snapshot is kept when the bias probe is enabled.
struct Transition {
  Eigen::VectorXd x;
  Eigen::VectorXd x_next;
  std::vector<Eigen::VectorXd> actions;
  std::vector<double> rewards;
  bool done = false;
  std::optional<env::World> world;
};

/// Fixed-capacity ring; overwrites oldest first. Every push gets a
/// monotonically increasing sequence number so callers can ask for "what was
/// written since" (bias-probe windowing).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return count_; }
  std::uint64_t total_written() const { return total_; }

  void push(Transition t);

  /// i-th oldest resident transition, i in [0, size).
  const Transition& operator[](std::size_t i) const;

  /// Sequence number of the i-th oldest resident transition.
  std::uint64_t seq_of(std::size_t i) const { return total_ - count_ + i; }

  const Transition& at_seq(std::uint64_t seq) const;

  /// Distinct indices into [0, size), uniform without replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch, SeededRng& rng) const;

  /// Sequence numbers still resident among transitions pushed after the
  /// caller last observed total_written() == written_before. Sequence
  /// numbers are 0-based push indices; with written_before = 0 this is the
  /// whole buffer.
  std::vector<std::uint64_t> resident_since(std::uint64_t written_before) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t count_ = 0;
  std::uint64_t total_ = 0;
};

}  // namespace matd3::marl
