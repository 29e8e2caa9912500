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

#include "capgen/params.hpp"

#include <string>

namespace capgen {

std::uint64_t derive_seed(std::uint64_t master, std::string_view component, std::size_t index) {
  std::string key(component);
  key += '#';
  key += std::to_string(index);
  return master ^ stable_hash(key);
}

}  // namespace capgen
