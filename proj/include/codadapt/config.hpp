#pragma once

// Experiment configuration. Every model, loss, training and protocol knob is
// a field here; `ExperimentConfig::parse` reads the flat key/value text format
// documented in configs/README.md.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace codadapt {

struct ViTConfig {
  std::int64_t image_size = 512;
  std::int64_t patch_size = 16;
  std::int64_t embed_dim = 192;
  std::int64_t depth = 12;
  std::int64_t num_heads = 3;
  std::int64_t interaction_groups = 4;  ///< N: layers are split into N contiguous groups
  std::int64_t mlp_ratio = 4;
  /// Grid the learned positional embedding is sized for; resampled bilinearly
  /// whenever the token grid differs.
  std::int64_t pretrain_size = 512;
  /// Per-channel normalization applied to [0,1] RGB input (ImageNet statistics).
  std::array<double, 3> pixel_mean{0.485, 0.456, 0.406};
  std::array<double, 3> pixel_std{0.229, 0.224, 0.225};
  std::uint64_t init_seed = 0;  ///< seed for the stand-in "pre-trained" weights
  std::string checkpoint;       ///< optional pre-trained weights, loaded after init

  std::int64_t grid() const { return image_size / patch_size; }
  std::string architecture_string() const;
  std::int64_t layers_per_group() const { return depth / interaction_groups; }
  void validate() const;
};

struct AdapterConfig {
  std::int64_t channels = 64;  ///< C_adapter == C_pyramid
  std::int64_t num_heads = 4;
  double ffn_ratio = 0.25;
  bool fuse_vit = true;  ///< add the final backbone tokens into p8/p16/p32
  void validate() const;
};

enum class HeadKind { UperNet, FpnPlain };

struct HeadConfig {
  std::vector<std::int64_t> ppm_scales{1, 2, 3, 6};
  std::int64_t fpn_channels = 256;
  HeadKind kind = HeadKind::UperNet;
  void validate() const;
};

struct LossConfig {
  double weight_gain = 5.0;
  std::int64_t weight_window = 31;
  double eps = 1e-6;
  void validate() const;
};

struct TrainConfig {
  double lr = 6e-5;
  double weight_decay = 0.05;
  std::int64_t batch_size = 2;
  std::int64_t epochs = 200;
  std::int64_t input_size = 512;
  bool freeze_backbone = true;
  std::uint64_t seed = 0;
  bool cosine_schedule = false;
  bool augment = false;  ///< horizontal flips; off by default
  std::string out_dir = "runs/default";
  void validate() const;
};

struct MultitaskConfig {
  std::int64_t source_epochs = 100;
  std::int64_t target_epochs = 200;
  std::int64_t zero_shot_epochs = 200;  ///< per-source tuning before zero-shot evaluation
  std::int64_t top_k = 3;
  bool load_head = true;  ///< MS_* stages load the head together with the adapter
  std::vector<std::string> tasks;  ///< empty = the nine default task names
  std::string train_root;
  std::string test_root;
  std::string task_map;  ///< optional "category=task" file
};

struct ExperimentConfig {
  ViTConfig vit;
  AdapterConfig adapter;
  HeadConfig head;
  LossConfig loss;
  TrainConfig train;
  MultitaskConfig multitask;

  void validate() const;

  /// Parses "key = value" lines; '#' starts a comment. Unknown keys throw.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Canonical dump of the architecture fields (vit/adapter/head).
  std::string architecture_string() const;
  /// FNV-1a hash of architecture_string(), hex encoded.
  std::string architecture_hash() const;
};

/// Desk-scale profile: 64 px input, tiny backbone, 64-channel head.
ExperimentConfig desk_config();

/// Shipped large profile: ViT-L sized backbone (D=1024, L=24, 16 heads).
ExperimentConfig large_config();

std::map<std::string, std::string> parse_key_values(const std::string& text);

std::vector<std::string> split_list(const std::string& s, char sep = ',');

/// 64-bit FNV-1a digest, lowercase hex.
std::string fnv1a_hex(const std::string& text);

}  // namespace codadapt
