#pragma once

#include <filesystem>
#include <string>

#include "crat/core/params.hpp"

namespace crat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic "CRATCKPT", u32 version, length-prefixed
/// descriptor text, u32 array count, then per array a length-prefixed name,
/// a flags byte (bit0 learnable, bit1 trainable), u64 rows, u64 cols and the
/// raw little-endian doubles. Round trips are bit-exact.
struct Checkpoint {
  ParamStore params;
  std::string descriptor;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const std::string& descriptor);
/// Throws DataError on a missing file, bad magic, unknown version or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace crat
