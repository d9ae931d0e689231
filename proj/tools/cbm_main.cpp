#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbm/batchopt.hpp"
#include "cbm/cliques.hpp"
#include "cbm/error.hpp"
#include "cbm/eval.hpp"
#include "cbm/io.hpp"
#include "cbm/pipeline.hpp"
#include "cbm/rng.hpp"
#include "cbm/similarity.hpp"
#include "cbm/synthetic.hpp"
#include "cbm/trainer.hpp"
#include "cbm/types.hpp"

namespace {

using cbm::FeatureFormat;
using json = nlohmann::json;

FeatureFormat format_for(const std::string& explicit_format, const std::filesystem::path& path) {
  if (explicit_format == "csv") return FeatureFormat::csv;
  if (explicit_format == "bin") return FeatureFormat::f64_binary;
  return path.extension() == ".csv" ? FeatureFormat::csv : FeatureFormat::f64_binary;
}

cbm::SyntheticSpec parse_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw cbm::IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw cbm::FormatError("bad spec JSON: " + std::string(e.what()));
  }
  cbm::SyntheticSpec spec;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "gaussian_blobs")
      spec.kind = cbm::SyntheticSpec::Kind::gaussian_blobs;
    else if (kind == "circular_manifold")
      spec.kind = cbm::SyntheticSpec::Kind::circular_manifold;
    else
      throw cbm::InvalidSpec("unknown synthetic kind: " + kind);
    spec.n_samples = j.at("n_samples").get<int>();
    spec.dim = j.at("dim").get<int>();
    if (j.contains("n_clusters"))
      spec.n_clusters = j.at("n_clusters").get<int>();
    else if (j.contains("period"))
      spec.n_clusters = j.at("period").get<int>();
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.seed = j.value("seed", 42ull);
  } catch (const json::exception& e) {
    throw cbm::FormatError("bad spec JSON: " + std::string(e.what()));
  }
  return spec;
}

int run(CLI::App& app, int argc, char** argv) {
  std::string features_path, similarity_path, cliques_path, batches_path, params_path;
  std::string spec_path, out_path, log_path, annotations_path, labels_path, summary_path;
  std::string config_path, format_flag = "auto";
  std::uint64_t seed = 42;
  double shrinkage = 0.1;
  int n_pos = 20, n_neg = 20, oracle_b = 2, oracle_r = 2;
  bool strict = false;

  app.require_subcommand(1);
  app.add_option("--seed", seed, "master seed for all randomness")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec_path, "synthetic spec JSON")->required();
  synth->add_option("--out", out_path, "output feature file")->required();
  synth->add_option("--format", format_flag, "csv|bin (default: by extension)");
  synth->add_option("--labels", labels_path, "also write ground-truth labels");
  synth->add_option("--annotations", annotations_path, "also write retrieval annotations");
  synth->add_option("--n-pos", n_pos, "positives per annotated query")->capture_default_str();
  synth->add_option("--n-neg", n_neg, "negatives per annotated query")->capture_default_str();

  auto* similarity = app.add_subcommand("similarity", "whitened-feature similarity kernel");
  similarity->add_option("--features", features_path)->required();
  similarity->add_option("--out", out_path, "output similarity file")->required();
  similarity->add_option("--shrinkage", shrinkage)->capture_default_str();
  similarity->add_option("--format", format_flag, "feature format csv|bin");

  auto* cliques = app.add_subcommand("cliques", "build compact cliques");
  cliques->add_option("--features", features_path)->required();
  cliques->add_option("--similarity", similarity_path)->required();
  cliques->add_option("--params", params_path, "clique params JSON")->required();
  cliques->add_option("--out", out_path)->required();
  cliques->add_option("--format", format_flag, "feature format csv|bin");

  auto* batches = app.add_subcommand("batches", "select batches of dissimilar cliques");
  batches->add_option("--similarity", similarity_path)->required();
  batches->add_option("--cliques", cliques_path)->required();
  batches->add_option("--params", params_path, "batch params JSON")->required();
  batches->add_option("--out", out_path)->required();
  batches->add_option("--log", log_path, "CCCP iteration log CSV");
  batches->add_flag("--strict", strict, "fail instead of keeping the best iterate");

  auto* train = app.add_subcommand("train", "train the surrogate classifier");
  train->add_option("--features", features_path)->required();
  train->add_option("--cliques", cliques_path)->required();
  train->add_option("--batches", batches_path)->required();
  train->add_option("--params", params_path, "train params JSON")->required();
  train->add_option("--out", out_path, "model file")->required();
  train->add_option("--log", log_path, "loss curve CSV");
  train->add_option("--format", format_flag, "feature format csv|bin");

  auto* pipeline = app.add_subcommand("pipeline", "run the alternating rounds");
  pipeline->add_option("--config", config_path, "pipeline config JSON")->required();
  pipeline->add_option("--out", out_path, "output directory")->required();
  pipeline->add_flag("--strict", strict, "fail when a CCCP solve does not converge");

  auto* eval = app.add_subcommand("eval", "retrieval ROC/AUC");
  eval->add_option("--similarity", similarity_path)->required();
  eval->add_option("--annotations", annotations_path)->required();
  eval->add_option("--out", out_path, "per-query CSV")->required();
  eval->add_option("--summary", summary_path, "summary JSON (default: out with .json)");

  auto* oracle = app.add_subcommand("oracle", "exhaustive batch optimum (guarded)");
  oracle->add_option("--similarity", similarity_path)->required();
  oracle->add_option("--cliques", cliques_path)->required();
  oracle->add_option("--b", oracle_b, "number of batches")->required();
  oracle->add_option("--r", oracle_r, "cliques per batch")->required();
  oracle->add_option("--out", out_path, "write the optimal assignment JSON");

  app.parse(argc, argv);

  if (synth->parsed()) {
    const cbm::SyntheticSpec spec = parse_synth_spec(spec_path);
    const cbm::SyntheticData data = generate_synthetic(spec);
    save_features(data.features, out_path, format_for(format_flag, out_path));
    if (!labels_path.empty()) cbm::save_labels(data.labels, labels_path);
    if (!annotations_path.empty())
      save_annotations(cbm::make_annotations(data.labels, n_pos, n_neg, seed), annotations_path);
    return 0;
  }

  if (similarity->parsed()) {
    const auto features = cbm::load_features(features_path, format_for(format_flag, features_path));
    save_similarity(cbm::similarity_kernel(cbm::whiten(features, shrinkage)), out_path);
    return 0;
  }

  if (cliques->parsed()) {
    const auto features = cbm::load_features(features_path, format_for(format_flag, features_path));
    const auto s = cbm::load_similarity(similarity_path);
    if (s.n() != features.n_samples())
      throw cbm::ShapeMismatch("similarity size does not match feature count");
    double lower_q = 0.05, upper_q = 0.95;
    const cbm::CliqueParams params = cbm::load_clique_params(params_path, &lower_q, &upper_q);
    const auto bands = cbm::reliability_bands(s, lower_q, upper_q);
    const auto built = cbm::build_cliques(s, params, &bands);
    save_cliques(built.assignment, out_path);
    std::cout << "cliques: " << built.assignment.k() << "\n";
    return 0;
  }

  if (batches->parsed()) {
    const auto s = cbm::load_similarity(similarity_path);
    const auto c = cbm::load_cliques(cliques_path);
    if (c.n != s.n()) throw cbm::ShapeMismatch("cliques built for a different sample count");
    cbm::BatchParams params = cbm::load_batch_params(params_path);
    const auto sp = cbm::condition_psd(cbm::clique_similarity(s, c));
    const auto result = cbm::cccp_solve(sp, c.membership(), params);
    if (strict && !result.converged)
      throw cbm::NonConvergence("CCCP did not converge within the iteration cap");
    save_batches(cbm::round_assignment(result.assignment, params.r), out_path);
    if (!log_path.empty()) save_cccp_log(result.log, log_path);
    std::cout << "objective: " << cbm::format_f64(result.log.back().objective)
              << (result.converged ? "" : " (not converged)") << "\n";
    return 0;
  }

  if (train->parsed()) {
    const auto features = cbm::load_features(features_path, format_for(format_flag, features_path));
    const auto c = cbm::load_cliques(cliques_path);
    const auto x = cbm::load_batches(batches_path);
    cbm::TrainParams params = cbm::load_train_params(params_path);
    params.seed = seed;
    const auto model =
        cbm::EmbeddingModel::init(static_cast<int>(features.dim()), params.hidden_dim, c.k(),
                                  cbm::derive_seed(seed, 0x6d6f64656cULL));
    const auto result = cbm::train(model, features, c, x, params);
    save_model(result.model, out_path);
    if (!log_path.empty()) save_loss_curve(result.curve, log_path);
    return 0;
  }

  if (pipeline->parsed()) {
    auto file = cbm::load_pipeline_config(config_path);
    if (file.features.empty())
      throw cbm::FormatError("pipeline config needs a \"features\" path");
    file.config.out_dir = out_path;
    const auto features = cbm::load_features(file.features, format_for("auto", file.features));
    const auto result = run_pipeline(features, file.config);
    if (strict)
      for (const auto& round : result.rounds)
        if (!round.cccp_converged)
          throw cbm::NonConvergence("CCCP did not converge in round " +
                                    std::to_string(round.round));
    std::cout << "final auc: " << cbm::format_f64(result.final_auc()) << "\n";
    return 0;
  }

  if (eval->parsed()) {
    const auto s = cbm::load_similarity(similarity_path);
    const auto ann = cbm::load_annotations(annotations_path);
    const auto result = cbm::evaluate_retrieval(s, ann);
    save_retrieval_csv(result, out_path);
    std::filesystem::path summary =
        summary_path.empty() ? std::filesystem::path(out_path).replace_extension(".json")
                             : std::filesystem::path(summary_path);
    save_retrieval_summary(result, summary);
    std::cout << "mean_auc: " << cbm::format_f64(result.mean_auc) << "\n";
    return 0;
  }

  if (oracle->parsed()) {
    const auto s = cbm::load_similarity(similarity_path);
    const auto c = cbm::load_cliques(cliques_path);
    const auto sp = cbm::condition_psd(cbm::clique_similarity(s, c));
    const auto result =
        cbm::brute_force_batches(sp, c.membership(), oracle_b, oracle_r, cbm::BatchParams{});
    std::cout << "optimum: " << cbm::format_f64(result.objective) << "\n";
    if (!out_path.empty()) save_batches(result.assignment, out_path);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unsupervised exemplar similarity learning via clique batches"};
  try {
    return run(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const cbm::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cbm::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
