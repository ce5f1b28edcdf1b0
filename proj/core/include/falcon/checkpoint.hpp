#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "falcon/nn.hpp"

namespace falcon {

inline constexpr int kCheckpointVersion = 1;

/// One trained predictor: a single model, or the members of an ensemble, plus
/// the post-hoc temperature and the config that produced it.
struct Checkpoint {
  std::vector<Model> members;
  nlohmann::json config = nlohmann::json::object();
  double temperature = 1.0;
};

/// File layout:
///   "FALCONCKPT\n", header byte length and "\n", JSON header, parameter blob.
/// The header carries architecture, member seeds, config, version and an
/// FNV-1a 64 checksum over the header (checksum field removed) and the blob.
/// The blob stores every parameter as a little-endian IEEE-754 double.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
void save_checkpoint(const Model& model, const nlohmann::json& config, const std::filesystem::path& path);

/// Throws IoError (unreadable/truncated), FormatError (not a checkpoint),
/// VersionError and ChecksumError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace falcon
