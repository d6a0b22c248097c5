#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blazedet/tensor.hpp"

namespace blazedet {

// Raised when a weight file cannot be parsed. offset() is the byte position
// at which the problem was detected.
class WeightFileError : public std::runtime_error {
 public:
  WeightFileError(const std::string& message, std::size_t offset)
      : std::runtime_error(message + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Named tensor collection that remembers insertion order, so a store written
// and re-read serializes identically.
class WeightStore {
 public:
  std::uint32_t format_version = 1;
  // Set when the store came from the random initializer; not persisted.
  std::optional<std::uint32_t> creation_seed;

  void put(const std::string& name, Tensor tensor) {
    for (auto& entry : entries_) {
      if (entry.first == name) {
        entry.second = std::move(tensor);
        return;
      }
    }
    entries_.emplace_back(name, std::move(tensor));
  }

  const Tensor& get(const std::string& name) const {
    for (const auto& entry : entries_) {
      if (entry.first == name) return entry.second;
    }
    throw std::out_of_range("weight store: no tensor named '" + name + "'");
  }

  // Flattened copy, convenient for bias vectors stored as 1x1x1xN.
  std::vector<float> get_vector(const std::string& name) const { return get(name).data(); }

  bool contains(const std::string& name) const {
    for (const auto& entry : entries_) {
      if (entry.first == name) return true;
    }
    return false;
  }

  std::size_t size() const { return entries_.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& entry : entries_) out.push_back(entry.first);
    return out;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

namespace detail {

inline void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline std::uint32_t read_u32(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                              const char* what) {
  if (pos + 4 > bytes.size()) {
    throw WeightFileError(std::string("weight file truncated while reading ") + what, pos);
  }
  const std::uint32_t v = static_cast<std::uint32_t>(bytes[pos]) |
                          (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
                          (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) |
                          (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
  pos += 4;
  return v;
}

}  // namespace detail

// Binary layout, all integers little-endian:
//   magic "BLZW" | u32 version (1) | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | rank x u32 dims |
//               product(dims) x f32 values
// The writer always emits rank 4; the reader accepts rank <= 4 and left-pads
// missing leading axes with 1.
inline std::vector<std::uint8_t> serialize_weights(const WeightStore& store) {
  std::vector<std::uint8_t> out;
  out.push_back('B');
  out.push_back('L');
  out.push_back('Z');
  out.push_back('W');
  detail::append_u32(out, 1u);
  detail::append_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& name : store.names()) {
    const Tensor& t = store.get(name);
    detail::append_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::append_u32(out, 4u);
    detail::append_u32(out, static_cast<std::uint32_t>(t.batch()));
    detail::append_u32(out, static_cast<std::uint32_t>(t.height()));
    detail::append_u32(out, static_cast<std::uint32_t>(t.width()));
    detail::append_u32(out, static_cast<std::uint32_t>(t.channels()));
    for (float v : t.data()) detail::append_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline WeightStore parse_weights(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 4 || bytes[0] != 'B' || bytes[1] != 'L' || bytes[2] != 'Z' ||
      bytes[3] != 'W') {
    throw WeightFileError("weight file magic is not BLZW", 0);
  }
  pos = 4;
  const std::uint32_t version = detail::read_u32(bytes, pos, "version");
  if (version != 1) {
    throw WeightFileError("unsupported weight file version " + std::to_string(version), 4);
  }
  const std::uint32_t count = detail::read_u32(bytes, pos, "tensor count");

  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t entry_start = pos;
    const std::uint32_t name_len = detail::read_u32(bytes, pos, "name length");
    if (pos + name_len > bytes.size()) {
      throw WeightFileError("weight file truncated inside tensor name", pos);
    }
    const std::string name(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                           bytes.begin() + static_cast<std::ptrdiff_t>(pos + name_len));
    pos += name_len;
    if (name.empty()) {
      throw WeightFileError("weight file has an empty tensor name", entry_start);
    }
    if (store.contains(name)) {
      throw WeightFileError("weight file repeats tensor name '" + name + "'", entry_start);
    }

    const std::size_t rank_pos = pos;
    const std::uint32_t rank = detail::read_u32(bytes, pos, "rank");
    if (rank > 4) {
      throw WeightFileError("tensor '" + name + "' has rank " + std::to_string(rank) +
                                ", maximum supported is 4",
                            rank_pos);
    }
    std::uint32_t dims[4] = {1, 1, 1, 1};
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::size_t dim_pos = pos;
      const std::uint32_t extent = detail::read_u32(bytes, pos, "dimension");
      if (extent == 0) {
        throw WeightFileError("tensor '" + name + "' has a zero dimension", dim_pos);
      }
      dims[4 - rank + d] = extent;
      total *= extent;
      if (total > bytes.size()) {
        throw WeightFileError("tensor '" + name + "' claims more values than the file holds",
                              dim_pos);
      }
    }
    if (pos + total * 4 > bytes.size()) {
      throw WeightFileError("weight file truncated inside values of tensor '" + name + "'", pos);
    }
    std::vector<float> values(total);
    for (std::size_t v = 0; v < total; ++v) {
      values[v] = std::bit_cast<float>(detail::read_u32(bytes, pos, "value"));
    }
    store.put(name, Tensor(Dims{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                                static_cast<int>(dims[2]), static_cast<int>(dims[3])},
                           std::move(values)));
  }
  if (pos != bytes.size()) {
    throw WeightFileError("weight file has trailing data after the last tensor", pos);
  }
  return store;
}

inline void save_weights(const WeightStore& store, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize_weights(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("failed while writing '" + path + "'");
  }
}

inline WeightStore load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open weight file '" + path + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_weights(bytes);
}

}  // namespace blazedet
