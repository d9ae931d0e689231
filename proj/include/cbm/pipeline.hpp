#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbm/batchopt.hpp"
#include "cbm/cliques.hpp"
#include "cbm/eval.hpp"
#include "cbm/similarity.hpp"
#include "cbm/trainer.hpp"
#include "cbm/types.hpp"

namespace cbm {

struct PipelineConfig {
  int rounds = 3;
  std::uint64_t seed = 42;
  double shrinkage = 0.1;
  double lower_quantile = 0.05;
  double upper_quantile = 0.95;
  CliqueParams cliques;
  BatchParams batches;
  TrainParams trainer;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> annotations;  // enables per-round AUC

  void validate() const;  // throws InvalidSpec
};

// Config JSON (see README for the schema); `features` / `annotations` paths
// inside the file are returned as written, resolution is the caller's business.
struct PipelineConfigFile {
  PipelineConfig config;
  std::filesystem::path features;  // required by the CLI entry point
};
PipelineConfigFile load_pipeline_config(const std::filesystem::path& path);

// Stage parameter files of the CLI share the pipeline's JSON blocks.
CliqueParams load_clique_params(const std::filesystem::path& path, double* lower_q,
                                double* upper_q);
BatchParams load_batch_params(const std::filesystem::path& path);
TrainParams load_train_params(const std::filesystem::path& path);

struct RoundDiagnostics {
  int round = 0;                     // 0-based
  double reliable_pairs_mean = 0.0;  // batches of this round under its input S
  int k_cliques = 0;
  bool cccp_converged = true;
};

struct PipelineResult {
  FeatureMatrix embeddings;              // final hidden representation
  std::vector<RoundDiagnostics> rounds;  // one per executed round
  // State of S_0 (initialization), S_1, ..., S_rounds.
  std::vector<double> auc;          // NaN when no annotations
  std::vector<int> spectrum_k90;    // eigenvalues to 90% cumulative mass
  double final_auc() const { return auc.back(); }
};

// One alternation step: cliques from S, clique similarity conditioned PSD,
// CCCP batch selection, surrogate training (fresh model in round 0, warm
// start with a re-initialized head afterwards), then the imputed similarity
// correlation_kernel(embed(model, features)). Artifacts land in
// out_dir/round_<i>/ when out_dir is nonempty.
struct RoundOutput {
  SimilarityMatrix s_next;
  EmbeddingModel model;
  RoundDiagnostics diag;
};
RoundOutput run_round(const FeatureMatrix& features, const SimilarityMatrix& s,
                      const PipelineConfig& config, int round,
                      const EmbeddingModel* warm_start);

// Initial S from whiten + similarity_kernel, then `rounds` alternations.
// Writes round artifact directories, diagnostics.csv and embeddings.bin.
PipelineResult run_pipeline(const FeatureMatrix& features, const PipelineConfig& config);

}  // namespace cbm
