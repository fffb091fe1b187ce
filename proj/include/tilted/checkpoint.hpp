#pragma once

// Binary checkpoint container:
//   magic "TLTD", u32 version, spec header, factor values as little-endian
//   float32 (slot order, row-major inside each grid), transforms as float64,
//   then the field block (encoding, decoder sizes, decoder weights as float32).

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tilted/field.hpp"
#include "tilted/grids.hpp"

namespace tilted {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_volume(const FactoredVolume& volume);
FactoredVolume deserialize_volume(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_field(const HybridField& field);
HybridField deserialize_field(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const HybridField& field);
HybridField load_checkpoint(const std::filesystem::path& path);

}  // namespace tilted
