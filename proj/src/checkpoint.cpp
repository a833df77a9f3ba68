// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <unordered_map>

#include "tagmoe/binary_io.hpp"
#include "tagmoe/errors.hpp"

namespace tagmoe {

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace io

namespace {
constexpr std::size_t kMagicLength = sizeof(kCheckpointMagic) - 1;
// Guards against absurd allocations when reading a corrupted header.
constexpr std::uint64_t kMaxRank = 8;
}  // namespace

std::string encode_checkpoint(const ParameterList& params) {
  std::string out(kCheckpointMagic, kMagicLength);
  io::put_uint<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    io::put_uint<std::uint64_t>(out, p.name.size());
    out += p.name;
    const auto& shape = p.tensor.shape();
    io::put_uint<std::uint64_t>(out, shape.size());
    for (const auto d : shape) io::put_uint<std::uint64_t>(out, d);
    for (const double v : p.tensor.data()) io::put_f64(out, v);
  }
  return out;
}

ParameterList decode_checkpoint(const std::string& bytes) {
  io::Reader in(bytes);
  if (in.get_bytes(kMagicLength, "magic") != std::string_view(kCheckpointMagic, kMagicLength)) {
    throw LoadError("not a TAGMOE1 checkpoint (bad magic)", 0);
  }
  const auto count = in.get_uint<std::uint64_t>("entry count");
  ParameterList params;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = in.get_uint<std::uint64_t>("name length");
    if (name_len > in.remaining()) throw LoadError("name length exceeds file size", in.offset());
    std::string name(in.get_bytes(name_len, "name"));
    const auto rank = in.get_uint<std::uint64_t>("rank");
    if (rank > kMaxRank) throw LoadError("implausible rank " + std::to_string(rank), in.offset());
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = in.get_uint<std::uint64_t>("dimension");
      n *= d;
    }
    if (n > in.remaining() / 8) throw LoadError("payload of '" + name + "' is truncated", in.offset());
    std::vector<double> data(n);
    for (auto& v : data) v = in.get_f64("payload");
    params.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(data))});
  }
  if (in.remaining() != 0) throw LoadError("trailing bytes after last entry", in.offset());
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  io::write_file(path.string(), encode_checkpoint(params));
}

ParameterList load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path.string()));
}

void assign_parameters(ParameterList& target, const ParameterList& source) {
  if (target.size() != source.size()) {
    throw ContractError("checkpoint holds " + std::to_string(source.size()) + " entries, model expects " +
                        std::to_string(target.size()));
  }
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& s : source) by_name.emplace(s.name, &s.tensor);
  for (auto& t : target) {
    const auto it = by_name.find(t.name);
    if (it == by_name.end()) throw ContractError("checkpoint is missing parameter '" + t.name + "'");
    if (it->second->shape() != t.tensor.shape()) {
      throw ShapeError("parameter '" + t.name + "' has shape " + shape_string(it->second->shape()) +
                       " in checkpoint, model expects " + shape_string(t.tensor.shape()));
    }
    const auto src = it->second->data();
    auto dst = t.tensor.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace tagmoe
