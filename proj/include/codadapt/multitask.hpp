#pragma once

// Multi-task adapter tuning: task partition, the ST / MT / MS-ST / MS-MT
// regimes, zero-shot transfer matrices, top-k grouping and the cross-task
// protocol.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "codadapt/data.hpp"
#include "codadapt/metrics.hpp"
#include "codadapt/train.hpp"
#include "json.hpp"

namespace codadapt {

/// Amphibian, Arthropoda, Artificial, Bird, Insect, Mammal, Reptile,
/// Underwater1, Underwater2.
const std::vector<std::string>& default_task_names();

/// category label -> task id. Task names map to themselves implicitly.
using CategoryMap = std::map<std::string, std::string>;

/// Reads "category = task" lines ('#' comments allowed).
CategoryMap load_category_map(const std::filesystem::path& path);

struct Partition {
  std::vector<std::vector<ImageSample>> per_task;  ///< indexed like the task list
  std::vector<std::string> excluded;               ///< ids of samples without a category label
  std::vector<std::size_t> counts() const;
};

/// Assigns every labelled sample to its task. Samples with an empty category
/// are excluded and listed. Throws InvalidInput for a category that maps to no
/// task (naming it) and for an id seen twice.
Partition partition_dataset(const std::vector<ImageSample>& samples,
                            const std::vector<std::string>& tasks, const CategoryMap& map = {});

struct TaskRegistry {
  std::vector<std::string> tasks;
  std::vector<std::vector<ImageSample>> train;
  std::vector<std::vector<ImageSample>> test;

  std::size_t index_of(const std::string& task) const;  ///< throws InvalidArgument
  /// Train samples of the listed tasks, concatenated in list order.
  std::vector<ImageSample> train_union(const std::vector<std::string>& names) const;
  const std::vector<ImageSample>& test_of(const std::string& task) const;
  /// Checks that ids are pairwise disjoint across tasks within each split.
  void validate() const;
};

TaskRegistry build_registry(const std::vector<ImageSample>& train_samples,
                            const std::vector<ImageSample>& test_samples,
                            const std::vector<std::string>& tasks, const CategoryMap& map = {});

/// Loads data.train_root / data.test_root and partitions them with the
/// configured task list and category map.
TaskRegistry load_registry(const ExperimentConfig& cfg);

enum class RegimeKind { ST, MT, MS_ST, MS_MT };

RegimeKind parse_regime_kind(const std::string& text);  ///< st, mt, ms-st, ms-mt
std::string regime_name(RegimeKind kind);               ///< ST, MT, MS-ST, MS-MT

struct Regime {
  RegimeKind kind = RegimeKind::ST;
  std::vector<std::string> source_tasks;  ///< informational for MS_*; empty for ST/MT
  std::vector<std::string> target_tasks;  ///< tasks trained on
  std::vector<std::string> eval_tasks;    ///< tasks scored afterwards; empty = target_tasks
  /// Throws ConfigError: ST/MS_ST need exactly one target, all need at least one.
  void validate() const;
};

struct RegimeOptions {
  std::filesystem::path out_dir;  ///< checkpoints and result.json; empty = none
  std::optional<std::int64_t> epochs;  ///< overrides the regime's default epoch count
  bool verbose = false;
};

struct RegimeResult {
  RegimeKind kind = RegimeKind::ST;
  std::vector<std::string> target_tasks;
  std::map<std::string, MetricReport> per_target;
  TrainResult train;
  nlohmann::json to_json() const;
};

/// Model initialized for `regime`: fresh adapter/head for ST and MT; for MS_*
/// the adapter (and the head when multitask.load_head) is loaded from
/// `source_ckpt`. Throws ConfigError when an MS_* regime has no checkpoint.
CodModel build_regime_model(const Regime& regime, const ExperimentConfig& cfg,
                            const std::filesystem::path& source_ckpt = {});

/// Trains on the union of the target tasks (train.epochs for ST/MT,
/// multitask.target_epochs for MS_*) and scores each evaluated task's test split.
RegimeResult train_regime(const Regime& regime, const TaskRegistry& registry,
                          const ExperimentConfig& cfg,
                          const std::filesystem::path& source_ckpt = {},
                          const RegimeOptions& opts = {});

/// Source stage: one adapter trained jointly on `sources` for
/// multitask.source_epochs, saved (adapter and head) to `ckpt`.
TrainResult train_source_adapter(const std::vector<std::string>& sources,
                                 const TaskRegistry& registry, const ExperimentConfig& cfg,
                                 const std::filesystem::path& ckpt, bool verbose = false);

struct TransferMatrix {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::vector<std::vector<double>> raw;         ///< [source][target] Score; NaN = failed
  std::vector<std::vector<double>> normalized;  ///< raw / column max
  std::vector<std::pair<std::size_t, std::size_t>> failed;  ///< (source, target) cells

  bool complete() const { return failed.empty(); }

  /// Recomputes `normalized`. The first (lowest source index) column maximum
  /// becomes exactly 1; tied maxima further down are set one ulp below 1 so
  /// each column holds a single 1.0. Failed cells stay NaN.
  void normalize();

  /// Writes `values` (normalized by default) with a header row of targets and
  /// a first column of sources.
  void write_csv(const std::filesystem::path& path, bool normalized_values = true) const;
  /// Reads a CSV written by write_csv; values become `raw` and are re-normalized.
  static TransferMatrix read_csv(const std::filesystem::path& path);
  /// Renders the normalized matrix as a colour heatmap PNG.
  void write_heatmap(const std::filesystem::path& path) const;
};

/// Builds a matrix from raw scores (normalizing it).
TransferMatrix make_transfer_matrix(std::vector<std::string> sources,
                                    std::vector<std::string> targets,
                                    std::vector<std::vector<double>> raw);

struct ZeroShotOptions {
  std::filesystem::path work_dir;  ///< per-source checkpoints; empty = keep in memory
  bool verbose = false;
};

/// One adapter per source task (multitask.zero_shot_epochs), each scored
/// without further tuning on every task's test split. A failing source marks
/// its row as failed instead of aborting.
TransferMatrix zero_shot_matrix(const TaskRegistry& registry, const ExperimentConfig& cfg,
                                const ZeroShotOptions& opts = {});

/// For every target, the k sources with the largest normalized score
/// (ties to the lower source index; failed cells rank last). The target's own
/// row is a candidate. Throws InvalidArgument unless 1 <= k <= #sources.
std::vector<std::pair<std::string, std::vector<std::string>>> top_k_groups(
    const TransferMatrix& matrix, std::size_t k);

nlohmann::ordered_json groups_to_json(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& groups);

struct CrossTaskRow {
  std::string target;
  double ms_st_score = 0;
  double st_score = 0;
};

/// Shared adapter trained on `sources` (multitask.source_epochs), then MS-ST
/// adaptation on each target (multitask.target_epochs), compared with an ST
/// baseline. Throws ValidationError listing the overlap when the sets
/// intersect, and when either is empty.
std::vector<CrossTaskRow> cross_task_protocol(const std::vector<std::string>& sources,
                                              const std::vector<std::string>& targets,
                                              const TaskRegistry& registry,
                                              const ExperimentConfig& cfg,
                                              const std::filesystem::path& work_dir,
                                              bool verbose = false);

/// Throws ValidationError unless both sets are nonempty and disjoint.
void check_disjoint(const std::vector<std::string>& sources,
                    const std::vector<std::string>& targets);

/// Regime x task Score grid with a per-row average.
struct ScoreGrid {
  std::vector<std::string> regimes;
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> scores;  ///< NaN where no run exists
  std::vector<double> row_mean() const;     ///< over available cells
  std::string to_text() const;
  std::string to_csv() const;
};

/// Collects every result.json under `runs` and averages scores per
/// (regime, task) across runs.
ScoreGrid collect_report(const std::filesystem::path& runs);

}  // namespace codadapt
