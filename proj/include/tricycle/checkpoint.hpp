#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tricycle {

inline constexpr char kCheckpointMagic[4] = {'T', 'C', 'G', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint32_t> extents;
  std::vector<float> values;
};

struct CheckpointOptimizer {
  std::string name;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
};

/// Training snapshot.
///
/// Binary layout, all integers and floats little-endian:
///   "TCG1" | u32 version | u64 step | u32 tensor count
///   per tensor:    u32 name length | name | u32 rank | rank x u32 extents | f32 values
///   u32 optimizer count
///   per optimizer: u32 name length | name | u64 t | u32 array count |
///                  per array: u64 length | f32 first moments | f32 second moments
///   u32 RNG state length | RNG state bytes
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t step = 0;
  std::vector<CheckpointTensor> tensors;
  std::vector<CheckpointOptimizer> optimizers;
  std::string rng_state;

  const CheckpointTensor* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tricycle
