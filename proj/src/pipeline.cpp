#include "cbm/pipeline.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cbm/error.hpp"
#include "cbm/io.hpp"
#include "cbm/rng.hpp"

namespace cbm {

using json = nlohmann::json;

namespace {
// Seed stream tags for the per-round generators.
constexpr std::uint64_t kTagModelInit = 0x6d6f64656cULL;   // model parameters
constexpr std::uint64_t kTagTraining = 0x747261696eULL;    // SGD sampling/jitter
}  // namespace

void PipelineConfig::validate() const {
  if (rounds < 1) throw InvalidSpec("rounds must be >= 1");
  if (shrinkage < 0.0 || shrinkage > 1.0) throw InvalidSpec("shrinkage must be in [0,1]");
  if (!(lower_quantile > 0.0 && lower_quantile < upper_quantile && upper_quantile < 1.0))
    throw InvalidSpec("need 0 < lower_q < upper_q < 1");
  cliques.validate();
  trainer.validate();
}

RoundOutput run_round(const FeatureMatrix& features, const SimilarityMatrix& s,
                      const PipelineConfig& config, int round,
                      const EmbeddingModel* warm_start) {
  const ReliabilityBands bands =
      reliability_bands(s, config.lower_quantile, config.upper_quantile);
  CliqueBuildResult built = build_cliques(s, config.cliques, &bands);
  const CliqueAssignment& cliques = built.assignment;
  const int k = cliques.k();
  if (k < 2) throw DegenerateProblem("need at least 2 cliques for the surrogate task");

  BatchParams bp = config.batches;
  bp.r = std::min(bp.r, k);  // small rounds can yield fewer cliques than requested
  bp.validate(k);

  const CliqueSimilarity sp = condition_psd(clique_similarity(s, cliques));
  const Eigen::MatrixXd c = cliques.membership();
  CccpResult cccp = cccp_solve(sp, c, bp);
  const BatchAssignment xbin = round_assignment(cccp.assignment, bp.r);

  auto [pair_counts, pair_mean] = reliable_pairs_per_batch(s, cliques, xbin, bands);

  TrainParams tp = config.trainer;
  tp.seed = derive_seed(config.seed, kTagTraining + static_cast<std::uint64_t>(round));
  const std::uint64_t model_seed =
      derive_seed(config.seed, kTagModelInit + static_cast<std::uint64_t>(round));
  EmbeddingModel model = EmbeddingModel::init(static_cast<int>(features.dim()),
                                              tp.hidden_dim, k, model_seed);
  if (warm_start != nullptr) {
    if (warm_start->hidden_dim() != model.hidden_dim() ||
        warm_start->input_dim() != model.input_dim())
      throw ShapeMismatch("warm-start model shape mismatch");
    // keep the representation, re-initialize only the classifier head
    model.w1 = warm_start->w1;
    model.b1 = warm_start->b1;
  }
  TrainResult trained = train(model, features, cliques, xbin, tp);

  RoundOutput out;
  out.model = std::move(trained.model);
  out.s_next = correlation_kernel(embed(out.model, features));
  out.diag.round = round;
  out.diag.reliable_pairs_mean = pair_mean;
  out.diag.k_cliques = k;
  out.diag.cccp_converged = cccp.converged;

  if (!config.out_dir.empty()) {
    const auto dir = config.out_dir / ("round_" + std::to_string(round));
    std::filesystem::create_directories(dir);
    save_cliques(cliques, dir / "cliques.json");
    save_batches(xbin, dir / "batches.json");
    save_model(out.model, dir / "model.bin");
    save_loss_curve(trained.curve, dir / "loss.csv");
    save_cccp_log(cccp.log, dir / "cccp.csv");
    save_similarity(out.s_next, dir / "similarity.bin");
  }
  return out;
}

PipelineResult run_pipeline(const FeatureMatrix& features, const PipelineConfig& config) {
  config.validate();
  features.validate();
  if (features.n_samples() < 2) throw InvalidSpec("pipeline needs at least 2 samples");

  std::optional<EvalAnnotations> ann;
  if (config.annotations) {
    ann = load_annotations(*config.annotations);
    ann->validate(features.n_samples());
  }
  if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

  PipelineResult result;
  auto record_state = [&](const SimilarityMatrix& s) {
    result.auc.push_back(ann ? evaluate_retrieval(s, *ann).mean_auc
                             : std::numeric_limits<double>::quiet_NaN());
    result.spectrum_k90.push_back(spectrum_count_to_mass(spectrum_cumulative(s), 0.90));
  };

  SimilarityMatrix s = similarity_kernel(whiten(features, config.shrinkage));
  record_state(s);

  EmbeddingModel model;
  for (int round = 0; round < config.rounds; ++round) {
    RoundOutput out = run_round(features, s, config, round, round == 0 ? nullptr : &model);
    s = std::move(out.s_next);
    model = std::move(out.model);
    result.rounds.push_back(out.diag);
    record_state(s);
  }

  result.embeddings = embed(model, features);

  if (!config.out_dir.empty()) {
    save_features(result.embeddings, config.out_dir / "embeddings.bin",
                  FeatureFormat::f64_binary);
    std::ofstream diag(config.out_dir / "diagnostics.csv");
    if (!diag) throw IoError("cannot write diagnostics.csv");
    diag << "round,auc_if_labels,spectrum_k90,reliable_pairs_mean\n";
    for (size_t i = 0; i <= result.rounds.size(); ++i) {
      const double rp = i < result.rounds.size()
                            ? result.rounds[i].reliable_pairs_mean
                            : std::numeric_limits<double>::quiet_NaN();
      diag << i << ',' << format_f64(result.auc[i]) << ',' << result.spectrum_k90[i] << ','
           << format_f64(rp) << '\n';
    }
  }
  return result;
}

namespace {

double get_num(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_number()) throw FormatError(std::string("config field not numeric: ") + key);
  return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_number_integer())
    throw FormatError(std::string("config field not an integer: ") + key);
  return j.at(key).get<int>();
}

CliqueParams clique_params_from_json(const json& c, const CliqueParams& base) {
  CliqueParams out = base;
  out.min_similarity = get_num(c, "min_similarity", std::numeric_limits<double>::quiet_NaN());
  out.max_clique_size = get_int(c, "max_clique_size", base.max_clique_size);
  out.target_k = get_int(c, "target_k", base.target_k);
  out.merge_ratio = get_num(c, "merge_ratio", base.merge_ratio);
  return out;
}

BatchParams batch_params_from_json(const json& b, const BatchParams& base) {
  BatchParams out = base;
  out.b = get_int(b, "b", base.b);
  out.r = get_int(b, "r", base.r);
  out.lambda1 = get_num(b, "lambda1", base.lambda1);
  out.lambda2 = get_num(b, "lambda2", base.lambda2);
  out.lambda3 = get_num(b, "lambda3", base.lambda3);
  out.p = get_num(b, "p", base.p);
  out.eps_smooth = get_num(b, "eps_smooth", base.eps_smooth);
  out.cccp_max_iter = get_int(b, "cccp_max_iter", base.cccp_max_iter);
  out.cccp_tol = get_num(b, "cccp_tol", base.cccp_tol);
  out.inner_max_iter = get_int(b, "inner_max_iter", base.inner_max_iter);
  out.inner_tol = get_num(b, "inner_tol", base.inner_tol);
  return out;
}

TrainParams train_params_from_json(const json& t, const TrainParams& base) {
  TrainParams out = base;
  out.hidden_dim = get_int(t, "hidden_dim", base.hidden_dim);
  out.learning_rate = get_num(t, "learning_rate", base.learning_rate);
  out.momentum = get_num(t, "momentum", base.momentum);
  out.weight_decay = get_num(t, "weight_decay", base.weight_decay);
  out.minibatch = get_int(t, "minibatch", base.minibatch);
  out.iterations = get_int(t, "iterations", base.iterations);
  out.jitter_sigma = get_num(t, "jitter_sigma", -1.0);
  return out;
}

json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw FormatError("bad JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

CliqueParams load_clique_params(const std::filesystem::path& path, double* lower_q,
                                double* upper_q) {
  const json j = parse_json_file(path);
  try {
    if (j.contains("reliability")) {
      const json& r = j.at("reliability");
      if (lower_q) *lower_q = get_num(r, "lower_q", *lower_q);
      if (upper_q) *upper_q = get_num(r, "upper_q", *upper_q);
    }
    return clique_params_from_json(j, CliqueParams{});
  } catch (const json::exception& e) {
    throw FormatError("bad clique params: " + std::string(e.what()));
  }
}

BatchParams load_batch_params(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  try {
    return batch_params_from_json(j, BatchParams{});
  } catch (const json::exception& e) {
    throw FormatError("bad batch params: " + std::string(e.what()));
  }
}

TrainParams load_train_params(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  try {
    return train_params_from_json(j, TrainParams{});
  } catch (const json::exception& e) {
    throw FormatError("bad train params: " + std::string(e.what()));
  }
}

PipelineConfigFile load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad config JSON: " + std::string(e.what()));
  }

  PipelineConfigFile file;
  PipelineConfig& cfg = file.config;
  try {
    if (j.contains("features")) file.features = j.at("features").get<std::string>();
    if (j.contains("annotations") && !j.at("annotations").is_null())
      cfg.annotations = std::filesystem::path(j.at("annotations").get<std::string>());
    cfg.rounds = get_int(j, "rounds", cfg.rounds);
    cfg.seed = static_cast<std::uint64_t>(get_num(j, "seed", 42.0));
    cfg.shrinkage = get_num(j, "shrinkage", cfg.shrinkage);
    if (j.contains("reliability")) {
      const json& r = j.at("reliability");
      cfg.lower_quantile = get_num(r, "lower_q", cfg.lower_quantile);
      cfg.upper_quantile = get_num(r, "upper_q", cfg.upper_quantile);
    }
    if (j.contains("cliques")) cfg.cliques = clique_params_from_json(j.at("cliques"), cfg.cliques);
    if (j.contains("batches")) cfg.batches = batch_params_from_json(j.at("batches"), cfg.batches);
    if (j.contains("trainer")) cfg.trainer = train_params_from_json(j.at("trainer"), cfg.trainer);
  } catch (const json::exception& e) {
    throw FormatError("bad config JSON: " + std::string(e.what()));
  }
  return file;
}

}  // namespace cbm
