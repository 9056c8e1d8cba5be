#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "meraugcn/metrics.hpp"
#include "meraugcn/model.hpp"
#include "meraugcn/protocols.hpp"
#include "meraugcn/trainer.hpp"

namespace meraugcn {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  Protocol protocol = Protocol::none;
  std::string manifest;
  std::string graph_file;  // overrides train.graph when set
  std::string checkpoint;  // eval input
  std::string out_dir = "run";
  std::size_t eval_batch_size = 64;

  /// Checks ranges and that every referenced path exists.
  void validate(bool need_manifest, bool need_checkpoint) const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its built-in default, in a stable order.
const std::vector<ConfigKey>& config_keys();

/// Throws ValidationError for unknown keys or unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

/// key = value lines; '#' starts a comment.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::string& path);

inline constexpr const char* kOutDirEnv = "MERAUGCN_OUT_DIR";
/// Replaces out_dir from the environment when the variable is set.
void apply_environment(RunConfig& config);

/// Canonical key = value dump of every key.
std::string config_to_text(const RunConfig& config);

AuGraph resolve_graph(const RunConfig& config);

struct RunSummary {
  std::vector<MetricsReport> fold_reports;
  MetricsReport summary;  // single fold, HDE average, or LOSO pooled
};

/// Trains and evaluates every fold of the protocol; writes per-fold
/// model.ckpt, history.csv, report.{txt,json}, plus the summary report in
/// out_dir.
RunSummary run_train(const RunConfig& config);

/// Scores `checkpoint` on every record of the manifest.
MetricsReport run_eval(const RunConfig& config);

}  // namespace meraugcn
