#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hrp/net.hpp"

namespace hrp {

// Layout (little-endian): 8-byte magic "HRPCKPT\0", u32 version,
// u32 D, H, C, P, then every parameter block as f64 in declaration order
// (W1 b1 W2 b2 Wc bc Wp bp, matrices row-major).
inline constexpr char kCheckpointMagic[8] = {'H', 'R', 'P', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace hrp
