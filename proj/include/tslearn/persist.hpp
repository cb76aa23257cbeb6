#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tslearn/model.hpp"

namespace tsl {

// Checkpoint layout, all integers little-endian:
//   8 bytes   magic "TSLEARN\0"
//   u32       format version (1)
//   u32 + n   canonical spec text
//   per parameter in layer order:
//     u32 + n name, u32 rank, rank x u64 extents, numel x f32 values
//   u64       CRC-64/ECMA-182 of every preceding byte
inline constexpr char kCheckpointMagic[8] = {'T', 'S', 'L', 'E', 'A', 'R', 'N', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t crc64(std::span<const std::uint8_t> bytes);

template <class T>
std::vector<std::uint8_t> serialize(const ModelState<T>& model);
// Returned model is frozen unless `frozen` is false.
ModelState<float> deserialize(std::span<const std::uint8_t> bytes, bool frozen = true);

// Written to a temporary sibling and renamed into place.
template <class T>
void save(const ModelState<T>& model, const std::filesystem::path& path);
ModelState<float> load(const std::filesystem::path& path, bool frozen = true);

// CRC-64 of the serialized form; equal for models with equal spec and float32 parameters.
template <class T>
std::uint64_t model_checksum(const ModelState<T>& model) {
    return crc64(serialize(model));
}

std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace tsl
