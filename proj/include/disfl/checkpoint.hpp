#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "disfl/tensor.hpp"

namespace disfl::tc {

struct NamedTensor {
  std::string name;
  Tensor<float> value;

  bool operator==(const NamedTensor&) const = default;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'S', 'F', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout, all integers little-endian:
///   magic[8] | u32 version | u32 count |
///   count x ( u32 name_len | name | u32 rank | u64 dims[rank] | f32 data[] )
std::string encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(std::string_view bytes);

/// Writes to a temporary sibling, then renames over `path`, so readers never
/// observe a partial file.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Same write-then-rename for any text or binary payload.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace disfl::tc
