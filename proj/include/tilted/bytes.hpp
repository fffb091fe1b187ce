#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <type_traits>
#include <vector>

#include "tilted/errors.hpp"

namespace tilted {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
  requires std::is_trivially_copyable_v<T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  const auto* raw = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), raw, raw + sizeof(T));
}

// Sequential reader over a byte buffer; throws StructuralError on overrun.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T read() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw StructuralError("truncated byte stream");
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t count) {
    if (pos_ + count > bytes_.size()) {
      throw StructuralError("truncated byte stream");
    }
    auto out = bytes_.subspan(pos_, count);
    pos_ += count;
    return out;
  }

  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace tilted
