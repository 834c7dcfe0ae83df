// SPDX-License-Identifier: Apache-2.0
/**
 * @file   optim.hpp
 * @brief  AdamW with decoupled weight decay, global-norm clipping and the
 *         learning-rate schedule.
 */
#pragma once

#include <synctva/config.hpp>
#include <synctva/nn.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace synctva {

struct AdamWHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

/// One in-place update of a flat parameter block at step t (1-based):
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g²
///   p -= lr (m̂ / (sqrt(v̂) + eps) + wd p)
void adamw_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                  std::span<double> v, std::uint64_t t, const AdamWHyper &h);

class AdamW {
public:
  explicit AdamW(ParamList params);

  /// Applies one update from the accumulated gradients, then zeroes them.
  void step(const AdamWHyper &h);
  void zero_grad();

  const ParamList &params() const { return params_; }
  std::uint64_t step_count() const { return t_; }
  std::vector<std::vector<double>> &first_moments() { return m_; }
  std::vector<std::vector<double>> &second_moments() { return v_; }
  const std::vector<std::vector<double>> &first_moments() const { return m_; }
  const std::vector<std::vector<double>> &second_moments() const { return v_; }
  void set_step_count(std::uint64_t t) { t_ = t; }

private:
  ParamList params_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

/// L2 norm over every parameter gradient.
double global_grad_norm(const ParamList &params);
/// Scales gradients so the global norm is at most `max_norm`; returns the
/// pre-clip norm. `max_norm` <= 0 leaves gradients untouched.
double clip_grad_norm(const ParamList &params, double max_norm);

/// Learning rate for a 0-based epoch.
double scheduled_lr(const ModelConfig &cfg, std::size_t epoch);

} // namespace synctva
