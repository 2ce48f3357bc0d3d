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

#include "dgpa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dgpa {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
  }
  double f64() {
    double v;
    std::memcpy(&v, take(8), 8);
    return v;
  }
  std::string str(std::size_t n) { return std::string(take(n), n); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw ParseError("checkpoint truncated at byte " + std::to_string(pos_), 0);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const TensorBundle& tensors) {
  std::string out = "DGPA";
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(t.data().data()), static_cast<std::size_t>(t.size()) * 8);
  }
  return out;
}

TensorBundle decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.str(4) != "DGPA") throw ParseError("not a DGPA checkpoint (bad magic)", 0);
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  const std::uint32_t count = in.u32();
  TensorBundle out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.str(in.u32());
    const std::uint32_t rank = in.u32();
    if (rank == 0) throw ParseError("tensor '" + name + "' has rank 0", 0);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<Index>(in.u32()));
    for (Index d : shape)
      if (d <= 0) throw ParseError("tensor '" + name + "' has a zero dimension", 0);
    VectorXr data(shape_size(shape));
    for (Index k = 0; k < data.size(); ++k) data[k] = in.f64();
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!in.done()) throw ParseError("trailing bytes after checkpoint payload", 0);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const TensorBundle& tensors) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(tensors);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

TensorBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

const Tensor& bundle_get(const TensorBundle& bundle, const std::string& name) {
  auto it = bundle.find(name);
  if (it == bundle.end()) throw ParseError("checkpoint is missing tensor '" + name + "'", 0);
  return it->second;
}

const Tensor& bundle_get(const TensorBundle& bundle, const std::string& name, const Shape& shape) {
  const Tensor& t = bundle_get(bundle, name);
  if (t.shape() != shape)
    throw ParseError("tensor '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                         shape_string(shape),
                     0);
  return t;
}

}  // namespace dgpa
