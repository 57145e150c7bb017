#pragma once
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "mat.hpp"
#include "rng.hpp"

namespace altlab::replay {

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool terminal = false;  // time-limit truncations are stored as non-terminal
};

// Column-wise minibatch view used by the learners.
struct Batch {
  Matrix obs, actions, next_obs;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminals;
  int size() const { return obs.rows; }
};

// FIFO ring buffer shared by all agents of a run; stored as flat per-field
// arrays. Never cleared by resets; capacity changes keep the newest items.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return count_; }
  std::int64_t total_pushed() const { return total_pushed_; }
  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }

  void push(const Transition& t);

  // Uniform sample with replacement; requires size() >= batch_size >= 1.
  Batch sample(int batch_size, Rng& rng) const;

  // Change capacity; when shrinking below the current size the oldest
  // items are dropped, the newest `new_capacity` survive in order.
  void set_capacity(std::size_t new_capacity);

  // Oldest-to-newest snapshot (test/diagnostic use).
  std::vector<Transition> contents() const;

  // The newest min(k, size()) observations, oldest first; used as the probe
  // batch for plasticity metrics. Requires k >= 1 and a non-empty buffer.
  Matrix recent_observations(int k) const;

  // FNV-1a over the raw bytes of every stored field, oldest to newest.
  // Bit-identical contents in identical order give identical hashes.
  std::uint64_t content_hash() const;

 private:
  std::size_t physical(std::size_t logical) const { return (start_ + logical) % capacity_; }

  std::size_t capacity_;
  int obs_dim_, action_dim_;
  std::vector<double> obs_, actions_, next_obs_, rewards_;
  std::vector<std::uint8_t> terminals_;
  std::size_t start_ = 0, count_ = 0;
  std::int64_t total_pushed_ = 0;
};

}  // namespace altlab::replay
