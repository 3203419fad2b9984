#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace fraudbench {

// Shared knobs for every gradient-trained model in the library.
struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  bool shuffle_each_epoch = true;
  double l2 = 0.0;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Holds first/second moment buffers sized to the
// full parameter vector; `step` applies one update from a matching gradient.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::size_t n_params, AdamConfig cfg = {})
      : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

  std::size_t size() const { return m_.size(); }
  std::uint64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  void step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("AdamState::step: size mismatch");
    ++t_;
    const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
      const double m_hat = m_[i] / b1t;
      const double v_hat = v_[i] / b2t;
      params[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace fraudbench
