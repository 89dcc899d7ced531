#include "codadapt/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "codadapt/errors.hpp"
#include "codadapt/loss.hpp"

namespace codadapt {

namespace F = torch::nn::functional;
namespace fs = std::filesystem;

std::unique_ptr<torch::optim::AdamW> make_optimizer(CodModel& model, const TrainConfig& cfg) {
  auto params = model->trainable_parameters();
  if (params.empty()) throw ConfigError("optimizer: the model has no trainable parameters");
  return std::make_unique<torch::optim::AdamW>(
      params, torch::optim::AdamWOptions(cfg.lr).weight_decay(cfg.weight_decay));
}

torch::Tensor batch_loss(CodModel& model, const torch::Tensor& images, const torch::Tensor& gts,
                         const LossConfig& cfg) {
  auto logits = model->forward(images);
  logits = F::interpolate(logits, F::InterpolateFuncOptions()
                                      .size(std::vector<std::int64_t>{gts.size(2), gts.size(3)})
                                      .mode(torch::kBilinear)
                                      .align_corners(false));
  return total_loss(logits, gts, cfg);
}

namespace {

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& group : opt.param_groups()) {
    static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
  }
}

}  // namespace

TrainResult train_loop(CodModel& model, const std::vector<ImageSample>& samples,
                       const ExperimentConfig& cfg, const TrainOptions& opts) {
  if (samples.empty()) throw InvalidInput("train: the sample list is empty");
  const auto epochs = opts.epochs.value_or(cfg.train.epochs);
  const auto batch = cfg.train.batch_size;
  const auto n = static_cast<std::int64_t>(samples.size());
  const auto steps_per_epoch = (n + batch - 1) / batch;
  std::int64_t total_steps = epochs * steps_per_epoch;
  if (opts.max_steps) total_steps = std::min(total_steps, *opts.max_steps);

  std::vector<ModelInput> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(preprocess(s, cfg));

  auto opt = make_optimizer(model, cfg.train);
  model->train();
  std::mt19937_64 rng(cfg.train.seed);
  std::vector<std::size_t> order(samples.size());

  TrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  if (!opts.out_dir.empty()) fs::create_directories(opts.out_dir);

  for (std::int64_t epoch = 0; epoch < epochs && result.steps < total_steps; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0;
    std::int64_t count = 0;
    for (std::int64_t b = 0; b < steps_per_epoch && result.steps < total_steps; ++b) {
      std::vector<ModelInput> items;
      std::vector<std::string> ids;
      for (std::int64_t i = b * batch; i < std::min(n, (b + 1) * batch); ++i) {
        auto item = inputs[order[i]];
        if (cfg.train.augment && std::bernoulli_distribution(0.5)(rng)) {
          item.image = item.image.flip({2});
          item.gt = item.gt.flip({2});
        }
        items.push_back(std::move(item));
        ids.push_back(samples[order[i]].id);
      }
      auto [images, gts] = collate(items);

      if (cfg.train.cosine_schedule) {
        const double t = static_cast<double>(result.steps) / static_cast<double>(total_steps);
        set_lr(*opt, cfg.train.lr * 0.5 * (1.0 + std::cos(M_PI * t)));
      }
      opt->zero_grad();
      auto loss = batch_loss(model, images, gts, cfg.loss);
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at step " << result.steps << " (epoch " << epoch
            << "), batch:";
        for (const auto& id : ids) msg << ' ' << id;
        throw NumericalError(msg.str());
      }
      loss.backward();
      opt->step();
      result.step_loss.push_back(value);
      sum += value;
      ++count;
      ++result.steps;
    }
    const double mean = sum / static_cast<double>(count);
    result.epoch_loss.push_back(mean);
    if (opts.verbose) {
      std::cerr << "epoch " << epoch + 1 << "/" << epochs << " loss " << mean << "\n";
    }
    if (mean < result.best_loss) {
      result.best_loss = mean;
      if (!opts.out_dir.empty()) {
        result.best_checkpoint = opts.out_dir / "best.ckpt";
        save_checkpoint(model, result.best_checkpoint, CheckpointMode::AdapterOnly,
                        {{"epoch", epoch + 1}, {"loss", mean}});
      }
    }
  }
  if (!opts.out_dir.empty()) {
    result.final_checkpoint = opts.out_dir / "final.ckpt";
    save_checkpoint(model, result.final_checkpoint, CheckpointMode::AdapterOnly,
                    {{"epoch", result.epoch_loss.size()}, {"loss", result.epoch_loss.back()}});
  }
  model->eval();
  return result;
}

void save_checkpoint(const CodModel& model, const fs::path& path, CheckpointMode mode,
                     const nlohmann::json& extra) {
  const auto tensors =
      mode == CheckpointMode::Full ? model->parameter_map() : model->adapter_head_map();
  nlohmann::json manifest = extra;
  manifest["mode"] = mode == CheckpointMode::Full ? "full" : "adapter_only";
  manifest["architecture_hash"] = model->config().architecture_hash();
  manifest["architecture"] = model->config().architecture_string();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_archive(path, tensors, manifest);
}

CheckpointLoad load_checkpoint(const fs::path& path, CodModel& model,
                               const std::vector<std::string>& groups) {
  auto archive = read_archive(path);
  CheckpointLoad out;
  out.manifest = archive.manifest;
  const auto expected = model->config().architecture_hash();
  const auto found = archive.manifest.value("architecture_hash", std::string{});
  if (found != expected) {
    out.warnings.push_back("checkpoint " + path.string() + " was written for architecture " +
                           (found.empty() ? "<unknown>" : found) + ", model is " + expected);
  }
  TensorMap source;
  for (auto& [name, t] : archive.tensors) {
    const bool wanted =
        groups.empty() || std::any_of(groups.begin(), groups.end(), [&](const std::string& g) {
          return name.rfind(g, 0) == 0;
        });
    if (wanted) source.emplace(name, t);
  }
  auto targets = model->parameter_map();
  out.report = assign_tensors(targets, source);
  return out;
}

ModelEvaluation evaluate_model(CodModel& model, const std::vector<ImageSample>& samples,
                               const ExperimentConfig& cfg,
                               const std::optional<fs::path>& pred_dir) {
  torch::NoGradGuard no_grad;
  model->eval();
  if (pred_dir) fs::create_directories(*pred_dir);
  ModelEvaluation out;
  for (const auto& s : samples) {
    const auto in = preprocess(s, cfg);
    const auto prob = model->predict(in.image.unsqueeze(0), s.original_size);
    const auto pred = GrayMap::from_tensor(prob);
    const auto gt = GrayMap::from_tensor(s.gt.to(torch::kFloat64));
    out.per_sample.push_back(evaluate_pair(pred, gt));
    out.ids.push_back(s.id);
    if (pred_dir) write_gray_map(*pred_dir / (s.id + ".png"), pred);
  }
  out.report = aggregate(out.per_sample);
  return out;
}

}  // namespace codadapt
