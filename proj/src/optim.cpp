// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/optim.hpp>

#include <cmath>
#include <numbers>

namespace synctva {

void adamw_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                  std::span<double> v, std::uint64_t t, const AdamWHyper &h) {
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw DimensionError("adamw_update: parameter, gradient and moment sizes differ");
  if (t == 0)
    throw ConfigError("adamw_update: step count starts at 1");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    p[i] -= h.lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * p[i]);
  }
}

AdamW::AdamW(ParamList params) : params_(std::move(params)) {
  for (const auto &np : params_) {
    m_.emplace_back(np.tensor.numel(), 0.0);
    v_.emplace_back(np.tensor.numel(), 0.0);
  }
}

void AdamW::step(const AdamWHyper &h) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor &p = params_[i].tensor;
    const std::vector<double> g = p.grad();
    adamw_update(p.mutable_values(), g, m_[i], v_[i], t_, h);
  }
  zero_grad();
}

void AdamW::zero_grad() {
  for (auto &np : params_)
    np.tensor.zero_grad();
}

double global_grad_norm(const ParamList &params) {
  double ss = 0.0;
  for (const auto &np : params) {
    if (!np.tensor.has_grad())
      continue;
    for (double g : np.tensor.node()->grad)
      ss += g * g;
  }
  return std::sqrt(ss);
}

double clip_grad_norm(const ParamList &params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto &np : params)
      if (np.tensor.has_grad())
        for (double &g : np.tensor.node()->grad)
          g *= s;
  }
  return norm;
}

double scheduled_lr(const ModelConfig &cfg, std::size_t epoch) {
  if (cfg.schedule == LrSchedule::Constant || cfg.epochs <= 1)
    return cfg.lr;
  const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

} // namespace synctva
