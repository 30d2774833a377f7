#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ncl/encoder.hpp"
#include "ncl/eval_harness.hpp"
#include "ncl/graph_embed.hpp"
#include "ncl/triple_miner.hpp"

namespace ncl {

enum class Stage { ingest, graph_train, mine, encode_train, eval, all };

std::string_view to_string(Stage s);
/// Accepts the subcommand spelling (`graph-train`). Throws ArgumentError.
Stage parse_stage(std::string_view s);

/// Input file as written in the config plus the directory it is relative to.
struct InputPath {
  std::string raw;
  std::filesystem::path base;

  bool empty() const noexcept { return raw.empty(); }
  std::filesystem::path resolved() const;
};

struct PipelinePaths {
  InputPath edges;
  InputPath documents;
  /// Optional ids removed from the graph before training (held-out evaluation papers).
  InputPath exclude;
  /// Optional query ids for mining; all documents in the graph otherwise.
  InputPath queries;
  /// `task.subtask` -> JSON-lines file.
  std::map<std::string, InputPath> ranking;
  std::map<std::string, InputPath> classification;
};

struct GraphStageConfig {
  GraphTrainConfig train;
  bool undirected = true;
  double holdout_fraction = 0.01;
  int eval_negatives = 100;
};

struct MineStageConfig {
  SamplingConfig sampling;
  double subsample = 1.0;
  bool by_query = true;
};

struct EncoderStageConfig {
  EncoderTrainConfig train;
  int hidden_dim = 64;
  int out_dim = 32;
};

/// Stage seeds are derived from `seed`; the nested seed fields are ignored.
struct PipelineConfig {
  PipelinePaths paths;
  GraphStageConfig graph;
  MineStageConfig mine;
  EncoderStageConfig encoder;
  ProbeConfig probe;
  std::uint64_t seed = 0;

  /// INI with sections paths, ranking, classification, graph, sampling,
  /// encoder, probe, pipeline. Unknown keys are rejected. Throws ConfigError.
  static PipelineConfig from_ini(const std::filesystem::path& path);
  static PipelineConfig from_ini_string(const std::string& text,
                                        const std::filesystem::path& base_dir = ".");

  /// Checks every nested config and the inputs `stage` reads. Throws ConfigError.
  void validate(Stage stage) const;

  /// Sorted `section.key=value` lines of every setting, paths as written.
  std::string canonical() const;
  std::string hash() const;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct StageResult {
  Stage stage;
  /// File names inside the stage directory, provenance sidecar last.
  std::vector<std::string> artifacts;
};

/// Validates the config, then runs `stage` (or every stage in order for
/// `all`) writing into `stage_dir`. Missing upstream artifacts raise
/// DependencyError. Progress lines go to `log` when given.
std::vector<StageResult> run(Stage stage, const PipelineConfig& cfg,
                             const std::filesystem::path& stage_dir, std::ostream* log = nullptr);

/// Artifact names each stage writes, sidecar excluded.
std::vector<std::string> stage_outputs(Stage stage);

/// Fixture files plus a `pipeline.ini` sized for the 200-node corpus.
void write_fixture_bundle(const std::filesystem::path& dir, std::uint64_t seed = 7);

}  // namespace ncl
