#pragma once

#include <cstdint>
#include <filesystem>

#include "dualspeech/config.hpp"
#include "dualspeech/text.hpp"
#include "dualspeech/training.hpp"

namespace dualspeech {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary little-endian file: magic "DSCK", version, value type tag "f8",
/// config snapshot, vocabulary, step, generator state, then every named
/// parameter with its shape, values and both Adam moments.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const RunConfig& config,
                     const PhonemeVocab& vocab);

struct Checkpoint {
  RunConfig config;
  PhonemeVocab vocab;
  TrainState state;
};

/// Throws DataError for a missing file, wrong magic, other versions or
/// parameter tables that do not match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dualspeech
