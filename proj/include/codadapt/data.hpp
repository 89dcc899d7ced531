#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "codadapt/config.hpp"

namespace codadapt {

struct ImageSample {
  std::string id;        ///< stable identifier (file stem)
  torch::Tensor image;   ///< (3, H, W) float32 RGB in [0, 1]
  torch::Tensor gt;      ///< (H, W) float32 in {0, 1}
  std::string category;  ///< raw category label, empty if unknown
  std::optional<std::string> task;
  std::pair<std::int64_t, std::int64_t> original_size{0, 0};
};

struct DatasetLoad {
  std::vector<ImageSample> samples;
  std::vector<std::string> warnings;                        ///< e.g. image without mask
  std::vector<std::pair<std::string, std::string>> errors;  ///< file, message
};

/// Reads `root/Imgs` and `root/GT`, pairing files by stem (sorted). Masks are
/// binarized at half the dtype maximum. Category labels come from
/// `root/labels.csv` (stem,category) when present, otherwise from COD10K-style
/// names "COD10K-CAM-<i>-<Super>-<j>-<Sub>-<k>" (category = Sub).
DatasetLoad load_dataset(const std::filesystem::path& root);

/// Tensors ready for the model.
struct ModelInput {
  torch::Tensor image;  ///< (3, S, S) normalized
  torch::Tensor gt;     ///< (1, S, S) binary, nearest-resized
  std::pair<std::int64_t, std::int64_t> original_size;
};

/// Bilinear resize to input_size^2 (identity when already that size), nearest
/// resize of the mask, per-channel mean/std normalization.
ModelInput preprocess(const ImageSample& sample, const ExperimentConfig& cfg);

torch::Tensor resize_bilinear(const torch::Tensor& chw, std::int64_t h, std::int64_t w);
torch::Tensor resize_nearest(const torch::Tensor& hw, std::int64_t h, std::int64_t w);

/// Stacks preprocessed samples into (B, 3, S, S) images and (B, 1, S, S) masks.
std::pair<torch::Tensor, torch::Tensor> collate(const std::vector<ModelInput>& items);

void write_sample(const std::filesystem::path& root, const ImageSample& sample);

// ---------------------------------------------------------------------------
// Synthetic camouflage corpus

/// One textured image with an object whose colour is close to the background.
/// `style` selects the object family (0 ellipse, 1 rectangle, 2 triangle, then
/// repeating with a different colour offset).
ImageSample synthetic_sample(int style, std::uint64_t seed, std::int64_t size, std::string id);

/// `count` samples of one style with ids "<prefix>-<i>".
std::vector<ImageSample> synthetic_samples(int style, std::size_t count, std::int64_t size,
                                           std::uint64_t seed, const std::string& prefix);

/// Writes root/{train,test}/{Imgs,GT,labels.csv} with one style per task name.
void write_synthetic_corpus(const std::filesystem::path& root, const std::vector<std::string>& tasks,
                            std::size_t n_train, std::size_t n_test, std::int64_t size,
                            std::uint64_t seed);

}  // namespace codadapt
