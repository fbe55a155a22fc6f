// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "banet/io.hpp"

namespace banet {

namespace {

constexpr std::size_t kMagicLength = sizeof(kCheckpointMagic) - 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError("checkpoint truncated at byte " + std::to_string(pos_) + ": need " + std::to_string(n) +
                        " more bytes, have " + std::to_string(bytes_.size() - pos_));
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::string out(kCheckpointMagic, kMagicLength);
  for (const auto& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (const auto d : e.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (const float v : e.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::string& bytes) {
  if (bytes.compare(0, kMagicLength, kCheckpointMagic) != 0) throw FormatError("not a checkpoint: bad magic");
  Reader r(bytes);
  r.text(kMagicLength);
  std::vector<CheckpointEntry> entries;
  while (!r.done()) {
    CheckpointEntry e;
    e.name = r.text(r.u32());
    const std::uint32_t rank = r.u32();
    std::int64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      e.shape.push_back(r.u32());
      count *= e.shape.back();
    }
    e.values.resize(static_cast<std::size_t>(count));
    for (auto& v : e.values) v = std::bit_cast<float>(r.u32());
    entries.push_back(std::move(e));
  }
  return entries;
}

template <typename T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path) {
  std::vector<CheckpointEntry> entries;
  for (const auto& p : net.parameters()) {
    CheckpointEntry e{p.name, p.tensor.shape(), {}};
    e.values.assign(p.tensor.data().begin(), p.tensor.data().end());
    entries.push_back(std::move(e));
  }
  write_file_atomic(path, encode_checkpoint(entries));
}

template <typename T>
void load_checkpoint(Network<T>& net, const std::filesystem::path& path) {
  const auto entries = decode_checkpoint(read_file(path));
  const auto& registry = net.parameters();
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const auto& p = registry[i];
    if (i >= entries.size()) throw ConfigurationError("checkpoint has no entry for parameter '" + p.name + "'");
    const auto& e = entries[i];
    if (e.name != p.name) {
      throw ConfigurationError("checkpoint mismatch at parameter '" + p.name + "': found '" + e.name + "'");
    }
    if (e.shape != p.tensor.shape()) {
      throw ConfigurationError("checkpoint mismatch at parameter '" + p.name + "': shape " + to_string(e.shape) +
                               " vs expected " + to_string(p.tensor.shape()));
    }
  }
  if (entries.size() > registry.size()) {
    throw ConfigurationError("checkpoint has unexpected parameter '" + entries[registry.size()].name + "'");
  }
  for (std::size_t i = 0; i < registry.size(); ++i) {
    auto tensor = registry[i].tensor;
    auto dst = tensor.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(entries[i].values[k]);
  }
}

template void save_checkpoint(const Network<float>&, const std::filesystem::path&);
template void save_checkpoint(const Network<double>&, const std::filesystem::path&);
template void load_checkpoint(Network<float>&, const std::filesystem::path&);
template void load_checkpoint(Network<double>&, const std::filesystem::path&);

}  // namespace banet
