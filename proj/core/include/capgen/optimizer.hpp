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

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "capgen/tensor.hpp"

namespace capgen {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

template <typename T>
struct ParamGroup {
  std::string name;
  double base_lr = 0.0;
  std::vector<Parameter<T>*> params;
};

/// Adam with per-group base learning rates. Weight decay is decoupled: it is
/// added to the normalized update rather than folded into the gradient.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ParamGroup<T>> groups, AdamConfig config);

  /// One update with lr = schedule_factor · group.base_lr. Every parameter
  /// must hold a gradient; a missing one raises UsageError naming it.
  void step(double schedule_factor);

  void zero_grad();

  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<ParamGroup<T>>& groups() const { return groups_; }

  struct Moments {
    Tensor<T> m;
    Tensor<T> v;
  };
  const std::map<std::string, Moments>& moments() const { return moments_; }

  /// Restores state saved from moments()/steps().
  void restore(std::size_t steps, std::map<std::string, Moments> moments);

 private:
  std::vector<ParamGroup<T>> groups_;
  AdamConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

struct SchedulerConfig {
  std::size_t T0 = 1;
  double T_mult = 1.0;
  double eta_min = 0.0;  // fraction of the base rate

  void validate() const;

  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

struct CyclePosition {
  std::size_t cycle = 0;
  double start = 0.0;   // step at which the cycle began
  double length = 0.0;  // T_i = T0 · T_mult^i
  double t_cur = 0.0;   // steps since the cycle began
};

CyclePosition cawr_position(double step, const SchedulerConfig& cfg);

/// Cosine annealing with warm restarts as a multiplier of the base rate:
/// eta_min + (1 - eta_min)(1 + cos(π t_cur / T_i)) / 2, restarting at 1.
double cawr_factor(double step, const SchedulerConfig& cfg);

}  // namespace capgen
