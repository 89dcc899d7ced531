#pragma once

// Tensor archive: a single file mapping dot-separated parameter names to dense
// arrays, plus a JSON manifest.
//
// Layout (little endian):
//   8 bytes   magic "CODARCH1"
//   8 bytes   u64 header length n
//   n bytes   JSON header {"manifest": {...}, "tensors": [{name, dtype, shape, offset, nbytes}]}
//   ...       raw tensor payloads, offsets relative to the end of the header

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"

namespace codadapt {

using TensorMap = std::map<std::string, torch::Tensor>;

struct Archive {
  nlohmann::json manifest;
  TensorMap tensors;
};

void write_archive(const std::filesystem::path& path, const TensorMap& tensors,
                   const nlohmann::json& manifest);

Archive read_archive(const std::filesystem::path& path);

/// Outcome of copying archive tensors into a set of named parameters.
struct LoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> unmatched;  ///< present in the archive, unknown to the model
  std::vector<std::string> missing;    ///< expected by the model, absent from the archive
};

/// Copies every source tensor whose name exists in `targets` (in place, no
/// autograd). A shape mismatch on a matched name throws LoadError naming it.
LoadReport assign_tensors(TensorMap& targets, const TensorMap& source);

}  // namespace codadapt
