#pragma once

#include "styland/io/png.hpp"
#include "styland/training.hpp"

#include <filesystem>

namespace styland::io {

// Container layout (little-endian):
//   8 bytes   magic "STYLCKPT"
//   u32, u32  format major, minor
//   u64       header length
//   header    UTF-8 JSON: config, step, seed, extractor id, tensor index
//   blobs     float32 tensors at the offsets listed in the index
constexpr std::uint32_t kCheckpointMajor = 1;
constexpr std::uint32_t kCheckpointMinor = 0;

struct CheckpointInfo {
  ModelConfig config;
  long step = 0;
  std::uint64_t seed = 0;
  std::string extractor_id;
  bool has_optimizer = false;
};

Bytes serialize_checkpoint(const TrainState<float>& state, bool include_optimizer = true);
TrainState<float> deserialize_checkpoint(const Bytes& data);
CheckpointInfo checkpoint_info(const Bytes& data);

void save_checkpoint(const std::filesystem::path& path, const TrainState<float>& state, bool include_optimizer = true);
TrainState<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace styland::io
