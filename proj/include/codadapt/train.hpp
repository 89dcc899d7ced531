#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "codadapt/archive.hpp"
#include "codadapt/data.hpp"
#include "codadapt/metrics.hpp"
#include "codadapt/model.hpp"

namespace codadapt {

/// AdamW over the parameters that currently require gradients.
/// Throws ConfigError when there are none.
std::unique_ptr<torch::optim::AdamW> make_optimizer(CodModel& model, const TrainConfig& cfg);

struct TrainOptions {
  std::optional<std::int64_t> epochs;  ///< overrides cfg.train.epochs
  std::optional<std::int64_t> max_steps;  ///< stop after this many optimizer steps
  std::filesystem::path out_dir;  ///< final/best checkpoints go here; empty = none
  bool verbose = false;
};

struct TrainResult {
  std::vector<double> epoch_loss;  ///< mean loss per epoch
  std::vector<double> step_loss;
  std::int64_t steps = 0;
  double best_loss = 0;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
};

/// Minimizes total_loss over `samples` for epochs * ceil(n / batch) steps.
/// The sample order is reshuffled every epoch from cfg.train.seed. Logits are
/// upsampled to the input size before the loss. Throws InvalidInput for an
/// empty sample list and NumericalError (with step and sample ids) when the
/// loss is not finite.
TrainResult train_loop(CodModel& model, const std::vector<ImageSample>& samples,
                       const ExperimentConfig& cfg, const TrainOptions& opts = {});

/// Upsampled logits and the loss for one preprocessed batch.
torch::Tensor batch_loss(CodModel& model, const torch::Tensor& images, const torch::Tensor& gts,
                         const LossConfig& cfg);

enum class CheckpointMode { AdapterOnly, Full };

/// adapter_only stores the adapter and head groups, full stores every parameter.
void save_checkpoint(const CodModel& model, const std::filesystem::path& path, CheckpointMode mode,
                     const nlohmann::json& extra = nlohmann::json::object());

struct CheckpointLoad {
  LoadReport report;
  std::vector<std::string> warnings;
  nlohmann::json manifest;
};

/// Restores every group present in the file. Parameters outside `groups`
/// (prefixes such as "adapter.") are skipped; an empty list accepts all.
/// Architecture hash mismatch is a warning, shape mismatch throws LoadError.
CheckpointLoad load_checkpoint(const std::filesystem::path& path, CodModel& model,
                               const std::vector<std::string>& groups = {});

struct ModelEvaluation {
  MetricReport report;
  std::vector<std::string> ids;
  std::vector<SampleMetrics> per_sample;
};

/// Predicts every sample at its original size and scores it against its mask.
/// Predictions are written as 8-bit PNGs to `pred_dir` when given.
ModelEvaluation evaluate_model(CodModel& model, const std::vector<ImageSample>& samples,
                               const ExperimentConfig& cfg,
                               const std::optional<std::filesystem::path>& pred_dir = std::nullopt);

}  // namespace codadapt
