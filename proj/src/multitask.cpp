#include "codadapt/multitask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "codadapt/errors.hpp"

namespace codadapt {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

}  // namespace

const std::vector<std::string>& default_task_names() {
  static const std::vector<std::string> names{"Amphibian", "Arthropoda", "Artificial",
                                              "Bird",      "Insect",     "Mammal",
                                              "Reptile",   "Underwater1", "Underwater2"};
  return names;
}

CategoryMap load_category_map(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task map " + path.string());
  CategoryMap map;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("task map: expected 'category = task': " + line);
    map[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return map;
}

std::vector<std::size_t> Partition::counts() const {
  std::vector<std::size_t> out;
  for (const auto& t : per_task) out.push_back(t.size());
  return out;
}

Partition partition_dataset(const std::vector<ImageSample>& samples,
                            const std::vector<std::string>& tasks, const CategoryMap& map) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < tasks.size(); ++i) index[tasks[i]] = i;
  Partition out;
  out.per_task.resize(tasks.size());
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (s.category.empty()) {
      out.excluded.push_back(s.id);
      continue;
    }
    if (!seen.insert(s.id).second) throw InvalidInput("partition: duplicate sample id '" + s.id + "'");
    std::string task = s.category;
    if (const auto m = map.find(s.category); m != map.end()) task = m->second;
    const auto it = index.find(task);
    if (it == index.end()) {
      throw InvalidInput("partition: category '" + s.category + "' of sample '" + s.id +
                         "' maps to no task");
    }
    auto copy = s;
    copy.task = task;
    out.per_task[it->second].push_back(std::move(copy));
  }
  return out;
}

std::size_t TaskRegistry::index_of(const std::string& task) const {
  const auto it = std::find(tasks.begin(), tasks.end(), task);
  if (it == tasks.end()) throw InvalidArgument("unknown task '" + task + "'");
  return static_cast<std::size_t>(it - tasks.begin());
}

std::vector<ImageSample> TaskRegistry::train_union(const std::vector<std::string>& names) const {
  std::vector<ImageSample> out;
  for (const auto& n : names) {
    const auto& part = train[index_of(n)];
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

const std::vector<ImageSample>& TaskRegistry::test_of(const std::string& task) const {
  return test[index_of(task)];
}

void TaskRegistry::validate() const {
  if (train.size() != tasks.size() || test.size() != tasks.size()) {
    throw InvalidInput("registry: split lists do not match the task list");
  }
  for (const auto* split : {&train, &test}) {
    std::set<std::string> ids;
    for (const auto& part : *split) {
      for (const auto& s : part) {
        if (!ids.insert(s.id).second) throw InvalidInput("registry: sample '" + s.id + "' in two tasks");
      }
    }
  }
}

TaskRegistry build_registry(const std::vector<ImageSample>& train_samples,
                            const std::vector<ImageSample>& test_samples,
                            const std::vector<std::string>& tasks, const CategoryMap& map) {
  TaskRegistry reg;
  reg.tasks = tasks;
  reg.train = partition_dataset(train_samples, tasks, map).per_task;
  reg.test = partition_dataset(test_samples, tasks, map).per_task;
  reg.validate();
  return reg;
}

TaskRegistry load_registry(const ExperimentConfig& cfg) {
  const auto& mt = cfg.multitask;
  if (mt.train_root.empty() || mt.test_root.empty()) {
    throw ConfigError("data.train_root and data.test_root must be set");
  }
  auto report = [](const DatasetLoad& load) {
    for (const auto& w : load.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& [file, msg] : load.errors) std::cerr << "error: " << file << ": " << msg << "\n";
  };
  const auto train = load_dataset(mt.train_root);
  const auto test = load_dataset(mt.test_root);
  report(train);
  report(test);
  const auto tasks = mt.tasks.empty() ? default_task_names() : mt.tasks;
  const auto map = mt.task_map.empty() ? CategoryMap{} : load_category_map(mt.task_map);
  return build_registry(train.samples, test.samples, tasks, map);
}

// ---------------------------------------------------------------------------
// Regimes

RegimeKind parse_regime_kind(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), ::tolower);
  std::replace(t.begin(), t.end(), '_', '-');
  if (t == "st") return RegimeKind::ST;
  if (t == "mt") return RegimeKind::MT;
  if (t == "ms-st") return RegimeKind::MS_ST;
  if (t == "ms-mt") return RegimeKind::MS_MT;
  throw ConfigError("unknown regime '" + text + "' (expected st, mt, ms-st or ms-mt)");
}

std::string regime_name(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::ST: return "ST";
    case RegimeKind::MT: return "MT";
    case RegimeKind::MS_ST: return "MS-ST";
    case RegimeKind::MS_MT: return "MS-MT";
  }
  return "?";
}

void Regime::validate() const {
  if (target_tasks.empty()) throw ConfigError("regime " + regime_name(kind) + ": no target task");
  if ((kind == RegimeKind::ST || kind == RegimeKind::MS_ST) && target_tasks.size() != 1) {
    throw ConfigError("regime " + regime_name(kind) + " needs exactly one target task, got " +
                      std::to_string(target_tasks.size()));
  }
}

nlohmann::json RegimeResult::to_json() const {
  nlohmann::json j;
  j["regime"] = regime_name(kind);
  j["targets"] = target_tasks;
  j["per_target"] = nlohmann::json::object();
  for (const auto& [task, r] : per_target) j["per_target"][task] = r.to_json();
  j["epoch_loss"] = train.epoch_loss;
  j["steps"] = train.steps;
  return j;
}

CodModel build_regime_model(const Regime& regime, const ExperimentConfig& cfg,
                            const fs::path& source_ckpt) {
  regime.validate();
  const bool ms = regime.kind == RegimeKind::MS_ST || regime.kind == RegimeKind::MS_MT;
  if (ms && source_ckpt.empty()) {
    throw ConfigError("regime " + regime_name(regime.kind) + " requires a source checkpoint");
  }
  if (ms && !fs::exists(source_ckpt)) {
    throw ConfigError("source checkpoint " + source_ckpt.string() + " does not exist");
  }
  CodModel model(cfg);
  if (ms) {
    std::vector<std::string> groups{"adapter."};
    if (cfg.multitask.load_head) groups.push_back("head.");
    const auto load = load_checkpoint(source_ckpt, model, groups);
    for (const auto& w : load.warnings) std::cerr << "warning: " << w << "\n";
  }
  return model;
}

RegimeResult train_regime(const Regime& regime, const TaskRegistry& registry,
                          const ExperimentConfig& cfg, const fs::path& source_ckpt,
                          const RegimeOptions& opts) {
  auto model = build_regime_model(regime, cfg, source_ckpt);
  const bool ms = regime.kind == RegimeKind::MS_ST || regime.kind == RegimeKind::MS_MT;
  TrainOptions topts;
  topts.epochs = opts.epochs.value_or(ms ? cfg.multitask.target_epochs : cfg.train.epochs);
  topts.out_dir = opts.out_dir;
  topts.verbose = opts.verbose;

  RegimeResult result;
  result.kind = regime.kind;
  result.target_tasks = regime.target_tasks;
  result.train = train_loop(model, registry.train_union(regime.target_tasks), cfg, topts);
  const auto& eval = regime.eval_tasks.empty() ? regime.target_tasks : regime.eval_tasks;
  for (const auto& task : eval) {
    std::optional<fs::path> pred_dir;
    if (!opts.out_dir.empty()) pred_dir = opts.out_dir / "pred" / task;
    result.per_target[task] = evaluate_model(model, registry.test_of(task), cfg, pred_dir).report;
  }
  if (!opts.out_dir.empty()) {
    auto j = result.to_json();
    j["sources"] = regime.source_tasks;
    j["seed"] = cfg.train.seed;
    std::ofstream(opts.out_dir / "result.json") << j.dump(2) << "\n";
  }
  return result;
}

TrainResult train_source_adapter(const std::vector<std::string>& sources,
                                 const TaskRegistry& registry, const ExperimentConfig& cfg,
                                 const fs::path& ckpt, bool verbose) {
  Regime regime{RegimeKind::MT, {}, sources, {}};
  auto model = build_regime_model(regime, cfg);
  TrainOptions topts;
  topts.epochs = cfg.multitask.source_epochs;
  topts.verbose = verbose;
  auto result = train_loop(model, registry.train_union(sources), cfg, topts);
  save_checkpoint(model, ckpt, CheckpointMode::AdapterOnly, {{"sources", sources}});
  return result;
}

// ---------------------------------------------------------------------------
// Transfer matrix

void TransferMatrix::normalize() {
  normalized.assign(raw.size(), std::vector<double>(targets.size(), kNaN));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::optional<std::size_t> best;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (std::isnan(raw[s][t])) continue;
      if (!best || raw[s][t] > raw[*best][t]) best = s;
    }
    if (!best || !(raw[*best][t] > 0)) continue;
    const double max = raw[*best][t];
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (std::isnan(raw[s][t])) continue;
      double v = raw[s][t] / max;
      if (s == *best) {
        v = 1.0;
      } else if (v >= 1.0) {
        v = std::nextafter(1.0, 0.0);
      }
      normalized[s][t] = v;
    }
  }
}

TransferMatrix make_transfer_matrix(std::vector<std::string> sources,
                                    std::vector<std::string> targets,
                                    std::vector<std::vector<double>> raw) {
  if (raw.size() != sources.size()) throw InvalidInput("transfer matrix: row count mismatch");
  for (const auto& row : raw) {
    if (row.size() != targets.size()) throw InvalidInput("transfer matrix: column count mismatch");
  }
  TransferMatrix m;
  m.sources = std::move(sources);
  m.targets = std::move(targets);
  m.raw = std::move(raw);
  for (std::size_t s = 0; s < m.raw.size(); ++s) {
    for (std::size_t t = 0; t < m.raw[s].size(); ++t) {
      if (std::isnan(m.raw[s][t])) m.failed.emplace_back(s, t);
    }
  }
  m.normalize();
  return m;
}

void TransferMatrix::write_csv(const fs::path& path, bool normalized_values) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& values = normalized_values ? normalized : raw;
  out << "source\\target";
  for (const auto& t : targets) out << ',' << t;
  out << '\n' << std::setprecision(17);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    out << sources[s];
    for (std::size_t t = 0; t < targets.size(); ++t) {
      out << ',';
      if (std::isnan(values[s][t])) {
        out << "nan";
      } else {
        out << values[s][t];
      }
    }
    out << '\n';
  }
}

TransferMatrix TransferMatrix::read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open matrix " + path.string());
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    rows.push_back(split_list(line, ','));
  }
  if (rows.size() < 2) throw InvalidInput("matrix " + path.string() + ": no data rows");
  std::vector<std::string> targets(rows[0].begin() + 1, rows[0].end());
  std::vector<std::string> sources;
  std::vector<std::vector<double>> raw;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != targets.size() + 1) {
      throw InvalidInput("matrix " + path.string() + ": row " + std::to_string(r) +
                         " has " + std::to_string(rows[r].size() - 1) + " values, expected " +
                         std::to_string(targets.size()));
    }
    sources.push_back(rows[r][0]);
    std::vector<double> vals;
    for (std::size_t c = 1; c < rows[r].size(); ++c) {
      const auto& cell = rows[r][c];
      if (cell == "nan" || cell == "NaN") {
        vals.push_back(kNaN);
        continue;
      }
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidInput("matrix " + path.string() + ": bad number '" + cell + "'");
      }
    }
    raw.push_back(std::move(vals));
  }
  return make_transfer_matrix(std::move(sources), std::move(targets), std::move(raw));
}

void TransferMatrix::write_heatmap(const fs::path& path) const {
  constexpr int cell = 48;
  constexpr int margin = 110;
  const int rows = static_cast<int>(sources.size());
  const int cols = static_cast<int>(targets.size());
  cv::Mat img(margin + rows * cell, margin + cols * cell, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::Mat level(1, 1, CV_8UC1);
  cv::Mat colour;
  for (int s = 0; s < rows; ++s) {
    for (int t = 0; t < cols; ++t) {
      const double v = normalized[s][t];
      cv::Scalar fill(128, 128, 128);
      if (!std::isnan(v)) {
        level.at<std::uint8_t>(0, 0) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255));
        cv::applyColorMap(level, colour, cv::COLORMAP_VIRIDIS);
        const auto c = colour.at<cv::Vec3b>(0, 0);
        fill = cv::Scalar(c[0], c[1], c[2]);
      }
      const cv::Rect r(margin + t * cell, margin + s * cell, cell, cell);
      cv::rectangle(img, r, fill, cv::FILLED);
      std::ostringstream txt;
      txt << std::fixed << std::setprecision(2) << v;
      cv::putText(img, std::isnan(v) ? "x" : txt.str(), {r.x + 6, r.y + cell / 2 + 4},
                  cv::FONT_HERSHEY_SIMPLEX, 0.4, v > 0.6 ? cv::Scalar(0, 0, 0) : cv::Scalar(255, 255, 255));
    }
  }
  for (int s = 0; s < rows; ++s) {
    cv::putText(img, sources[s].substr(0, 12), {4, margin + s * cell + cell / 2 + 4},
                cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
  }
  for (int t = 0; t < cols; ++t) {
    cv::Mat label(cell, margin, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::putText(label, targets[t].substr(0, 12), {4, cell / 2 + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0));
    cv::Mat rotated;
    cv::rotate(label, rotated, cv::ROTATE_90_COUNTERCLOCKWISE);
    rotated.copyTo(img(cv::Rect(margin + t * cell, 0, cell, margin)));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw std::runtime_error("cannot write " + path.string());
}

TransferMatrix zero_shot_matrix(const TaskRegistry& registry, const ExperimentConfig& cfg,
                                const ZeroShotOptions& opts) {
  if (registry.tasks.size() < 2) throw InvalidInput("zero-shot matrix needs at least two tasks");
  const auto n = registry.tasks.size();
  std::vector<std::vector<double>> raw(n, std::vector<double>(n, kNaN));
  for (std::size_t s = 0; s < n; ++s) {
    const auto& source = registry.tasks[s];
    try {
      auto model = build_regime_model({RegimeKind::ST, {}, {source}, {}}, cfg);
      TrainOptions topts;
      topts.epochs = cfg.multitask.zero_shot_epochs;
      topts.verbose = opts.verbose;
      train_loop(model, registry.train_union({source}), cfg, topts);
      if (!opts.work_dir.empty()) {
        save_checkpoint(model, opts.work_dir / ("source_" + source + ".ckpt"),
                        CheckpointMode::AdapterOnly, {{"sources", {source}}});
      }
      for (std::size_t t = 0; t < n; ++t) {
        try {
          raw[s][t] = evaluate_model(model, registry.test[t], cfg).report.score;
        } catch (const std::exception& e) {
          std::cerr << "zero-shot: evaluating " << source << " on " << registry.tasks[t]
                    << " failed: " << e.what() << "\n";
        }
      }
    } catch (const std::exception& e) {
      std::cerr << "zero-shot: training on " << source << " failed: " << e.what() << "\n";
    }
    if (opts.verbose) std::cerr << "zero-shot: source " << source << " done\n";
  }
  return make_transfer_matrix(registry.tasks, registry.tasks, std::move(raw));
}

std::vector<std::pair<std::string, std::vector<std::string>>> top_k_groups(
    const TransferMatrix& matrix, std::size_t k) {
  if (k < 1 || k > matrix.sources.size()) {
    throw InvalidArgument("top_k_groups: k = " + std::to_string(k) + " but there are " +
                          std::to_string(matrix.sources.size()) + " source tasks");
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  for (std::size_t t = 0; t < matrix.targets.size(); ++t) {
    std::vector<std::size_t> order(matrix.sources.size());
    std::iota(order.begin(), order.end(), 0);
    auto value = [&](std::size_t s) {
      const double v = matrix.normalized[s][t];
      return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return value(a) > value(b); });
    std::vector<std::string> group;
    for (std::size_t i = 0; i < k; ++i) group.push_back(matrix.sources[order[i]]);
    out.emplace_back(matrix.targets[t], std::move(group));
  }
  return out;
}

nlohmann::ordered_json groups_to_json(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& groups) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [target, sources] : groups) j[target] = sources;
  return j;
}

void check_disjoint(const std::vector<std::string>& sources,
                    const std::vector<std::string>& targets) {
  if (sources.empty() || targets.empty()) {
    throw ValidationError("cross-task protocol: source and target sets must be nonempty");
  }
  std::vector<std::string> overlap;
  for (const auto& t : targets) {
    if (std::find(sources.begin(), sources.end(), t) != sources.end()) overlap.push_back(t);
  }
  if (!overlap.empty()) {
    throw ValidationError("cross-task protocol: source and target tasks overlap: " + join(overlap));
  }
}

std::vector<CrossTaskRow> cross_task_protocol(const std::vector<std::string>& sources,
                                              const std::vector<std::string>& targets,
                                              const TaskRegistry& registry,
                                              const ExperimentConfig& cfg, const fs::path& work_dir,
                                              bool verbose) {
  check_disjoint(sources, targets);
  for (const auto& t : sources) registry.index_of(t);
  for (const auto& t : targets) registry.index_of(t);
  fs::create_directories(work_dir);
  const auto ckpt = work_dir / "source.ckpt";
  train_source_adapter(sources, registry, cfg, ckpt, verbose);
  std::vector<CrossTaskRow> rows;
  for (const auto& target : targets) {
    CrossTaskRow row;
    row.target = target;
    const auto ms = train_regime({RegimeKind::MS_ST, sources, {target}, {}}, registry, cfg, ckpt);
    row.ms_st_score = ms.per_target.at(target).score;
    const auto st = train_regime({RegimeKind::ST, {}, {target}, {}}, registry, cfg);
    row.st_score = st.per_target.at(target).score;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report

std::vector<double> ScoreGrid::row_mean() const {
  std::vector<double> out;
  for (const auto& row : scores) {
    double sum = 0;
    int n = 0;
    for (double v : row) {
      if (!std::isnan(v)) {
        sum += v;
        ++n;
      }
    }
    out.push_back(n ? sum / n : kNaN);
  }
  return out;
}

std::string ScoreGrid::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(8) << "Method";
  for (const auto& t : tasks) out << std::right << std::setw(13) << t;
  out << std::setw(9) << "Avg" << '\n';
  const auto means = row_mean();
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    out << std::left << std::setw(8) << regimes[r] << std::right << std::fixed << std::setprecision(3);
    for (double v : scores[r]) {
      if (std::isnan(v)) {
        out << std::setw(13) << "-";
      } else {
        out << std::setw(13) << v;
      }
    }
    if (std::isnan(means[r])) {
      out << std::setw(9) << "-";
    } else {
      out << std::setw(9) << means[r];
    }
    out << '\n';
  }
  return out.str();
}

std::string ScoreGrid::to_csv() const {
  std::ostringstream out;
  out << "method";
  for (const auto& t : tasks) out << ',' << t;
  out << ",avg\n" << std::setprecision(6);
  const auto means = row_mean();
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    out << regimes[r];
    for (double v : scores[r]) {
      out << ',';
      if (!std::isnan(v)) out << v;
    }
    out << ',';
    if (!std::isnan(means[r])) out << means[r];
    out << '\n';
  }
  return out.str();
}

ScoreGrid collect_report(const fs::path& runs) {
  if (!fs::is_directory(runs)) throw InvalidInput("report: " + runs.string() + " is not a directory");
  // regime -> task -> (sum, count)
  std::map<std::string, std::map<std::string, std::pair<double, int>>> acc;
  std::set<std::string> task_set;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(runs)) {
    if (e.is_regular_file() && e.path().filename() == "result.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    nlohmann::json j;
    try {
      std::ifstream(f) >> j;
    } catch (const std::exception& e) {
      std::cerr << "report: skipping " << f << ": " << e.what() << "\n";
      continue;
    }
    const auto regime = j.value("regime", std::string{});
    if (regime.empty() || !j.contains("per_target")) continue;
    for (const auto& [task, rep] : j["per_target"].items()) {
      auto& cell = acc[regime][task];
      cell.first += MetricReport::from_json(rep).score;
      cell.second += 1;
      task_set.insert(task);
    }
  }
  if (acc.empty()) throw InvalidInput("report: no result.json found under " + runs.string());

  ScoreGrid grid;
  for (const auto& t : default_task_names()) {
    if (task_set.erase(t)) grid.tasks.push_back(t);
  }
  grid.tasks.insert(grid.tasks.end(), task_set.begin(), task_set.end());
  for (const auto* r : {"ST", "MT", "MS-ST", "MS-MT"}) {
    if (acc.count(r)) grid.regimes.push_back(r);
  }
  for (const auto& [r, _] : acc) {
    if (std::find(grid.regimes.begin(), grid.regimes.end(), r) == grid.regimes.end()) {
      grid.regimes.push_back(r);
    }
  }
  for (const auto& r : grid.regimes) {
    std::vector<double> row;
    for (const auto& t : grid.tasks) {
      const auto it = acc[r].find(t);
      row.push_back(it == acc[r].end() ? kNaN : it->second.first / it->second.second);
    }
    grid.scores.push_back(std::move(row));
  }
  return grid;
}

}  // namespace codadapt
