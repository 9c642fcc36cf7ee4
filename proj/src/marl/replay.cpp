#include <algorithm>

#include "matd3/marl/replay.hpp"

namespace matd3::marl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("ReplayBuffer: capacity must be positive");
  ring_.resize(capacity);
}

void ReplayBuffer::push(Transition t) {
  ring_[total_ % capacity_] = std::move(t);
  total_ += 1;
  if (count_ < capacity_) count_ += 1;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= count_) throw Error("ReplayBuffer: index out of range");
  return ring_[(total_ - count_ + i) % capacity_];
}

const Transition& ReplayBuffer::at_seq(std::uint64_t seq) const {
  if (seq >= total_ || seq + count_ < total_)
    throw Error("ReplayBuffer: sequence " + std::to_string(seq) + " not resident");
  return ring_[seq % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, SeededRng& rng) const {
  if (batch > count_)
    throw Error("ReplayBuffer: cannot sample " + std::to_string(batch) + " from " +
                std::to_string(count_) + " stored transitions");
  return sample_distinct(rng, count_, batch);
}

std::vector<std::uint64_t> ReplayBuffer::resident_since(std::uint64_t written_before) const {
  const std::uint64_t oldest = total_ - count_;
  const std::uint64_t begin = std::max(written_before, oldest);
  std::vector<std::uint64_t> seqs;
  for (std::uint64_t s = begin; s < total_; ++s) seqs.push_back(s);
  return seqs;
}

}  // namespace matd3::marl
