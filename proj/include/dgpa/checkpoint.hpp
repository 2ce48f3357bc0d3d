/*
 * Copyright 2026 The DGPA Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "dgpa/tensor.hpp"

namespace dgpa {

/// Named tensors in insertion-independent (sorted) order.
using TensorBundle = std::map<std::string, Tensor>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers little-endian u32:
///   "DGPA" | version | count | { name_len | name | rank | dims... | f64 payload }*
void save_checkpoint(const std::filesystem::path& path, const TensorBundle& tensors);
TensorBundle load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const TensorBundle& tensors);
TensorBundle decode_checkpoint(const std::string& bytes);

/// Lookup that names the missing tensor and checks its shape.
const Tensor& bundle_get(const TensorBundle& bundle, const std::string& name);
const Tensor& bundle_get(const TensorBundle& bundle, const std::string& name, const Shape& shape);

}  // namespace dgpa
