#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "scenediff/grad/param_store.hpp"

namespace scenediff::grad {

/// On disk a checkpoint is two files sharing a stem:
///
///   <stem>.manifest   text; "scenediff-checkpoint 1", then "meta <key> <value>"
///                     lines, then "tensor <name> <d0>x<d1>... <offset> f32" lines
///   <stem>.bin        little-endian float32 values, tensors back to back
///
/// Offsets count float32 elements from the start of the blob. Loading upcasts
/// to double.
struct Checkpoint {
  ParamStore params;
  std::map<std::string, std::string> meta;
};

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path blob_path(const std::filesystem::path& stem);

void save_checkpoint(const std::filesystem::path& stem, const ParamStore& params,
                     const std::map<std::string, std::string>& meta = {});
Checkpoint load_checkpoint(const std::filesystem::path& stem);

/// FNV-1a of the manifest and blob bytes, hex encoded.
std::string checkpoint_hash(const std::filesystem::path& stem);

}  // namespace scenediff::grad
