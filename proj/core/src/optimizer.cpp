/*
 * Copyright 2026 The capgen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "capgen/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace capgen {

template <typename T>
Adam<T>::Adam(std::vector<ParamGroup<T>> groups, AdamConfig config)
    : groups_(std::move(groups)), config_(config) {
  std::set<const Parameter<T>*> seen;
  for (const auto& g : groups_) {
    if (!(g.base_lr > 0.0)) throw ConfigError("group '" + g.name + "' needs a positive base_lr");
    for (const Parameter<T>* p : g.params) {
      if (!seen.insert(p).second) {
        throw ConfigError("parameter '" + p->name + "' appears in more than one group");
      }
      moments_[p->name] = {Tensor<T>(p->value.shape()), Tensor<T>(p->value.shape())};
    }
  }
}

template <typename T>
void Adam<T>::step(double schedule_factor) {
  for (const auto& g : groups_) {
    for (const Parameter<T>* p : g.params) {
      if (!p->has_grad) throw UsageError("adam: parameter '" + p->name + "' has no gradient");
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& g : groups_) {
    const double lr = schedule_factor * g.base_lr;
    for (Parameter<T>* p : g.params) {
      Moments& mo = moments_.at(p->name);
      auto theta = p->value.data();
      auto grad = p->grad.data();
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = grad[i];
        const double m = b1 * mo.m[i] + (1.0 - b1) * gi;
        const double v = b2 * mo.v[i] + (1.0 - b2) * gi * gi;
        mo.m[i] = static_cast<T>(m);
        mo.v[i] = static_cast<T>(v);
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        const double update =
            m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * theta[i];
        theta[i] = static_cast<T>(theta[i] - lr * update);
      }
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& g : groups_)
    for (Parameter<T>* p : g.params) p->zero_grad();
}

template <typename T>
void Adam<T>::restore(std::size_t steps, std::map<std::string, Moments> moments) {
  for (auto& [name, mo] : moments_) {
    auto it = moments.find(name);
    if (it == moments.end()) throw UsageError("adam state misses parameter '" + name + "'");
    if (it->second.m.shape() != mo.m.shape() || it->second.v.shape() != mo.v.shape()) {
      throw DimensionError("adam state for '" + name + "' has the wrong shape");
    }
    mo = std::move(it->second);
  }
  t_ = steps;
}

template class Adam<float>;
template class Adam<double>;

void SchedulerConfig::validate() const {
  if (T0 < 1) throw ConfigError("sched.T0 must be at least 1");
  if (!(T_mult >= 1.0)) throw ConfigError("sched.T_mult must be at least 1");
  if (!(eta_min >= 0.0 && eta_min <= 1.0)) throw ConfigError("sched.eta_min must lie in [0, 1]");
}

CyclePosition cawr_position(double step, const SchedulerConfig& cfg) {
  cfg.validate();
  if (step < 0.0) throw UsageError("scheduler step must be non-negative");
  const double t0 = static_cast<double>(cfg.T0);
  CyclePosition pos;
  if (cfg.T_mult == 1.0) {
    const double cycle = std::floor(step / t0);
    pos.cycle = static_cast<std::size_t>(cycle);
    pos.start = cycle * t0;
    pos.length = t0;
  } else {
    double start = 0.0, length = t0;
    std::size_t cycle = 0;
    while (start + length <= step) {
      start += length;
      length *= cfg.T_mult;
      ++cycle;
    }
    pos.cycle = cycle;
    pos.start = start;
    pos.length = length;
  }
  pos.t_cur = step - pos.start;
  return pos;
}

double cawr_factor(double step, const SchedulerConfig& cfg) {
  const CyclePosition pos = cawr_position(step, cfg);
  return cfg.eta_min +
         (1.0 - cfg.eta_min) * (1.0 + std::cos(std::numbers::pi * pos.t_cur / pos.length)) / 2.0;
}

}  // namespace capgen
