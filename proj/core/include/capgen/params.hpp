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

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "capgen/tensor.hpp"

namespace capgen {

/// 64-bit FNV-1a; stable across platforms and builds.
constexpr std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed: master XOR hash(component).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view component) {
  return master ^ stable_hash(component);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component, std::size_t index);

/// Named, ordered collection of trainable parameters. Element addresses are
/// stable, so modules keep raw pointers into the store.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<T>& add(const std::string& name, const std::string& group, Tensor<T> value) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw UsageError("duplicate parameter name '" + name + "'");
    it->second.name = name;
    it->second.group = group;
    it->second.value = std::move(value);
    it->second.zero_grad();
    return it->second;
  }

  /// Uniform in [-bound, bound], seeded from (seed, name) so the draw does not
  /// depend on registration order.
  Parameter<T>& add_uniform(const std::string& name, const std::string& group, Shape shape,
                            double bound, std::uint64_t seed) {
    Tensor<T> v(std::move(shape));
    std::mt19937_64 rng(derive_seed(seed, name));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : v.data()) x = static_cast<T>(dist(rng));
    return add(name, group, std::move(v));
  }

  Parameter<T>& add_constant(const std::string& name, const std::string& group, Shape shape,
                             T fill) {
    return add(name, group, Tensor<T>(std::move(shape), fill));
  }

  Parameter<T>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::map<std::string, Parameter<T>>& all() { return params_; }
  const std::map<std::string, Parameter<T>>& all() const { return params_; }

  std::vector<Parameter<T>*> group(const std::string& g) {
    std::vector<Parameter<T>*> out;
    for (auto& [name, p] : params_) {
      if (p.group == g) out.push_back(&p);
    }
    return out;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

inline double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace capgen
