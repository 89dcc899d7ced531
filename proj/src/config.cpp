#include "codadapt/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "codadapt/errors.hpp"

namespace codadapt {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::array<double, 3> to_triple(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 3) throw ConfigError("config: '" + key + "' expects three values");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"vit.image_size", [](auto& c, auto& k, auto& v) { c.vit.image_size = to_int(k, v); }},
      {"vit.patch_size", [](auto& c, auto& k, auto& v) { c.vit.patch_size = to_int(k, v); }},
      {"vit.embed_dim", [](auto& c, auto& k, auto& v) { c.vit.embed_dim = to_int(k, v); }},
      {"vit.depth", [](auto& c, auto& k, auto& v) { c.vit.depth = to_int(k, v); }},
      {"vit.num_heads", [](auto& c, auto& k, auto& v) { c.vit.num_heads = to_int(k, v); }},
      {"vit.interaction_groups",
       [](auto& c, auto& k, auto& v) { c.vit.interaction_groups = to_int(k, v); }},
      {"vit.mlp_ratio", [](auto& c, auto& k, auto& v) { c.vit.mlp_ratio = to_int(k, v); }},
      {"vit.pretrain_size", [](auto& c, auto& k, auto& v) { c.vit.pretrain_size = to_int(k, v); }},
      {"vit.pixel_mean", [](auto& c, auto& k, auto& v) { c.vit.pixel_mean = to_triple(k, v); }},
      {"vit.pixel_std", [](auto& c, auto& k, auto& v) { c.vit.pixel_std = to_triple(k, v); }},
      {"vit.init_seed",
       [](auto& c, auto& k, auto& v) { c.vit.init_seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"vit.checkpoint", [](auto& c, auto&, auto& v) { c.vit.checkpoint = v; }},
      {"adapter.channels", [](auto& c, auto& k, auto& v) { c.adapter.channels = to_int(k, v); }},
      {"adapter.num_heads", [](auto& c, auto& k, auto& v) { c.adapter.num_heads = to_int(k, v); }},
      {"adapter.ffn_ratio", [](auto& c, auto& k, auto& v) { c.adapter.ffn_ratio = to_double(k, v); }},
      {"adapter.fuse_vit", [](auto& c, auto& k, auto& v) { c.adapter.fuse_vit = to_bool(k, v); }},
      {"head.kind",
       [](auto& c, auto& k, auto& v) {
         if (v == "upernet") {
           c.head.kind = HeadKind::UperNet;
         } else if (v == "fpn_plain") {
           c.head.kind = HeadKind::FpnPlain;
         } else {
           throw ConfigError("config: '" + k + "' must be upernet or fpn_plain, got '" + v + "'");
         }
       }},
      {"head.fpn_channels", [](auto& c, auto& k, auto& v) { c.head.fpn_channels = to_int(k, v); }},
      {"head.ppm_scales",
       [](auto& c, auto& k, auto& v) {
         c.head.ppm_scales.clear();
         for (const auto& p : split_list(v)) c.head.ppm_scales.push_back(to_int(k, p));
       }},
      {"loss.weight_gain", [](auto& c, auto& k, auto& v) { c.loss.weight_gain = to_double(k, v); }},
      {"loss.weight_window", [](auto& c, auto& k, auto& v) { c.loss.weight_window = to_int(k, v); }},
      {"loss.eps", [](auto& c, auto& k, auto& v) { c.loss.eps = to_double(k, v); }},
      {"train.lr", [](auto& c, auto& k, auto& v) { c.train.lr = to_double(k, v); }},
      {"train.weight_decay", [](auto& c, auto& k, auto& v) { c.train.weight_decay = to_double(k, v); }},
      {"train.batch_size", [](auto& c, auto& k, auto& v) { c.train.batch_size = to_int(k, v); }},
      {"train.epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = to_int(k, v); }},
      {"train.input_size", [](auto& c, auto& k, auto& v) { c.train.input_size = to_int(k, v); }},
      {"train.freeze_backbone",
       [](auto& c, auto& k, auto& v) { c.train.freeze_backbone = to_bool(k, v); }},
      {"train.seed",
       [](auto& c, auto& k, auto& v) { c.train.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"train.cosine_schedule",
       [](auto& c, auto& k, auto& v) { c.train.cosine_schedule = to_bool(k, v); }},
      {"train.augment", [](auto& c, auto& k, auto& v) { c.train.augment = to_bool(k, v); }},
      {"train.out_dir", [](auto& c, auto&, auto& v) { c.train.out_dir = v; }},
      {"multitask.source_epochs",
       [](auto& c, auto& k, auto& v) { c.multitask.source_epochs = to_int(k, v); }},
      {"multitask.target_epochs",
       [](auto& c, auto& k, auto& v) { c.multitask.target_epochs = to_int(k, v); }},
      {"multitask.zero_shot_epochs",
       [](auto& c, auto& k, auto& v) { c.multitask.zero_shot_epochs = to_int(k, v); }},
      {"multitask.top_k", [](auto& c, auto& k, auto& v) { c.multitask.top_k = to_int(k, v); }},
      {"multitask.load_head",
       [](auto& c, auto& k, auto& v) { c.multitask.load_head = to_bool(k, v); }},
      {"multitask.tasks", [](auto& c, auto&, auto& v) { c.multitask.tasks = split_list(v); }},
      {"data.train_root", [](auto& c, auto&, auto& v) { c.multitask.train_root = v; }},
      {"data.test_root", [](auto& c, auto&, auto& v) { c.multitask.test_root = v; }},
      {"data.task_map", [](auto& c, auto&, auto& v) { c.multitask.task_map = v; }},
  };
  return table;
}

}  // namespace

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void ViTConfig::validate() const {
  if (patch_size <= 0 || image_size <= 0 || embed_dim <= 0 || depth <= 0 || num_heads <= 0 ||
      interaction_groups <= 0 || mlp_ratio <= 0 || pretrain_size <= 0) {
    throw ConfigError("vit: all sizes must be positive");
  }
  if (image_size % patch_size != 0) {
    throw ConfigError("vit: image_size " + std::to_string(image_size) +
                      " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (pretrain_size % patch_size != 0) {
    throw ConfigError("vit: pretrain_size must be divisible by patch_size");
  }
  if (depth % interaction_groups != 0) {
    throw ConfigError("vit: depth " + std::to_string(depth) + " is not divisible by " +
                      std::to_string(interaction_groups) + " interaction groups");
  }
  if (embed_dim % num_heads != 0) {
    throw ConfigError("vit: embed_dim must be divisible by num_heads");
  }
}

void AdapterConfig::validate() const {
  if (channels <= 0 || num_heads <= 0 || channels % num_heads != 0) {
    throw ConfigError("adapter: channels must be a positive multiple of num_heads");
  }
  if (ffn_ratio <= 0) throw ConfigError("adapter: ffn_ratio must be positive");
}

void HeadConfig::validate() const {
  if (fpn_channels <= 0) throw ConfigError("head: fpn_channels must be positive");
  if (ppm_scales.empty()) throw ConfigError("head: ppm_scales must be nonempty");
  for (std::size_t i = 0; i < ppm_scales.size(); ++i) {
    if (ppm_scales[i] <= 0 || (i > 0 && ppm_scales[i] <= ppm_scales[i - 1])) {
      throw ConfigError("head: ppm_scales must be positive and strictly increasing");
    }
  }
}

void LossConfig::validate() const {
  if (weight_gain < 0) throw ConfigError("loss: weight_gain must be nonnegative");
  if (weight_window <= 0 || weight_window % 2 == 0) {
    throw ConfigError("loss: weight_window must be a positive odd number");
  }
  if (!(eps > 0)) throw ConfigError("loss: eps must be positive");
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be nonnegative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (epochs < 0) throw ConfigError("train: epochs must be nonnegative");
  if (input_size <= 0 || input_size % 32 != 0) {
    throw ConfigError("train: input_size must be a positive multiple of 32");
  }
}

void ExperimentConfig::validate() const {
  vit.validate();
  adapter.validate();
  head.validate();
  loss.validate();
  train.validate();
  if (vit.image_size != train.input_size) {
    throw ConfigError("config: vit.image_size (" + std::to_string(vit.image_size) +
                      ") differs from train.input_size (" + std::to_string(train.input_size) + ")");
  }
  if (multitask.top_k < 1) throw ConfigError("multitask: top_k must be at least 1");
  if (multitask.source_epochs < 1 || multitask.target_epochs < 1 || multitask.zero_shot_epochs < 1) {
    throw ConfigError("multitask: epoch counts must be at least 1");
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  const auto kv = parse_key_values(text);
  for (const auto& [k, v] : kv) {
    const auto it = setters().find(k);
    if (it == setters().end()) throw ConfigError("config: unknown key '" + k + "'");
    it->second(cfg, k, v);
  }
  // input_size drives the backbone unless the backbone size was set explicitly
  const bool has_vit = kv.count("vit.image_size") > 0;
  const bool has_train = kv.count("train.input_size") > 0;
  if (has_train && !has_vit) cfg.vit.image_size = cfg.train.input_size;
  if (has_vit && !has_train) cfg.train.input_size = cfg.vit.image_size;
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ViTConfig::architecture_string() const {
  std::ostringstream os;
  os << "vit.patch_size=" << patch_size << ";vit.embed_dim=" << embed_dim << ";vit.depth=" << depth
     << ";vit.num_heads=" << num_heads << ";vit.interaction_groups=" << interaction_groups
     << ";vit.mlp_ratio=" << mlp_ratio << ";vit.pretrain_size=" << pretrain_size;
  return os.str();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::architecture_string() const {
  std::ostringstream os;
  os << vit.architecture_string() << ";adapter.channels=" << adapter.channels
     << ";adapter.num_heads=" << adapter.num_heads << ";adapter.ffn_ratio=" << adapter.ffn_ratio
     << ";adapter.fuse_vit=" << adapter.fuse_vit
     << ";head.kind=" << (head.kind == HeadKind::UperNet ? "upernet" : "fpn_plain")
     << ";head.fpn_channels=" << head.fpn_channels << ";head.ppm_scales=";
  for (auto s : head.ppm_scales) os << s << ',';
  return os.str();
}

std::string ExperimentConfig::architecture_hash() const { return fnv1a_hex(architecture_string()); }

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.vit.image_size = 64;
  c.train.input_size = 64;
  c.head.fpn_channels = 64;
  return c;
}

ExperimentConfig large_config() {
  ExperimentConfig c;
  c.vit.embed_dim = 1024;
  c.vit.depth = 24;
  c.vit.num_heads = 16;
  c.vit.interaction_groups = 4;
  c.adapter.channels = 256;
  c.adapter.num_heads = 8;
  c.head.fpn_channels = 256;
  return c;
}

}  // namespace codadapt
