#pragma once

#include <filesystem>
#include <optional>

#include "cosdd/config.hpp"
#include "cosdd/trainer.hpp"

namespace cosdd {

inline constexpr const char* kCheckpointVersion = "v1";

// Single file: a magic line, a JSON header (format version, resolved config,
// normalization, step, payload size and CRC-32) and a torch archive holding
// every parameter, buffer and optimizer moment. Written to a temporary file
// and renamed into place.
void save_checkpoint(const TrainingState& state, const std::filesystem::path& path);

// Throws CorruptFile on truncation or checksum failure, VersionMismatch on a
// format version or preset that differs from `expected_preset`.
TrainingState load_checkpoint(const std::filesystem::path& path,
                              std::optional<Preset> expected_preset = std::nullopt);

}  // namespace cosdd
