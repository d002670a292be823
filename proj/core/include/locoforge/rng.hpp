#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace locoforge {

// Seeded random engine shared by environments, samplers and the trainer.
// Reproducible on a given build; streams serialize to text for resumable
// training checkpoints.
class RandomEngine {
 public:
  explicit RandomEngine(std::uint64_t seed = 0) : gen_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_);
  }

  std::mt19937_64& raw() { return gen_; }

  std::string save_state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }
  void restore_state(const std::string& text) {
    std::istringstream is(text);
    is >> gen_;
    if (is.fail()) throw std::runtime_error("RandomEngine: bad serialized state");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace locoforge
