#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "cbm/batchopt.hpp"
#include "cbm/cliques.hpp"
#include "cbm/similarity.hpp"
#include "cbm/types.hpp"

namespace cbm {

struct RocResult {
  int query = -1;
  double auc = 0.0;
  std::vector<std::pair<double, double>> curve;  // (fpr, tpr), threshold sweep
};

struct RetrievalResult {
  double mean_auc = 0.0;
  int skipped = 0;
  std::vector<RocResult> per_query;
};

// AUC as the exact rank statistic: (wins + ties/2) / (|pos| * |neg|). The
// curve is emitted for plotting only. Throws EmptyInput.
RocResult roc_auc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg);

// Per query q: positive scores {S[q][j] : j in pos}, negatives likewise.
// Queries with an empty side are skipped and counted.
RetrievalResult evaluate_retrieval(const SimilarityMatrix& s, const EvalAnnotations& ann);

// Per batch row: unordered sample pairs within the row's clique union that
// are reliably similar or reliably dissimilar under the bands.
std::pair<std::vector<long>, double> reliable_pairs_per_batch(const SimilarityMatrix& s,
                                                              const CliqueAssignment& c,
                                                              const BatchAssignment& x,
                                                              const ReliabilityBands& bands);

// CSV (query,auc) next to a JSON summary {"mean_auc":..., "n_queries":..., "skipped":...}.
void save_retrieval_csv(const RetrievalResult& r, const std::filesystem::path& csv_path);
void save_retrieval_summary(const RetrievalResult& r, const std::filesystem::path& json_path);

}  // namespace cbm
