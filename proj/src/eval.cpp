#include "cbm/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "cbm/error.hpp"
#include "cbm/io.hpp"

namespace cbm {

using json = nlohmann::json;

RocResult roc_auc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg) {
  if (scores_pos.empty() || scores_neg.empty())
    throw EmptyInput("roc_auc needs nonempty positive and negative scores");

  // Mann-Whitney U via average ranks of the pooled scores.
  std::vector<std::pair<double, int>> pooled;  // (score, is_positive)
  pooled.reserve(scores_pos.size() + scores_neg.size());
  for (double v : scores_pos) pooled.emplace_back(v, 1);
  for (double v : scores_neg) pooled.emplace_back(v, 0);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum_pos = 0.0;
  for (size_t i = 0; i < pooled.size();) {
    size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based ranks i+1..j
    for (size_t t = i; t < j; ++t)
      if (pooled[t].second) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(scores_pos.size());
  const double nn = static_cast<double>(scores_neg.size());
  RocResult result;
  result.auc = (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);

  // Curve from a descending threshold sweep (predict positive when score >= t).
  std::set<double, std::greater<>> thresholds;
  for (const auto& [v, lbl] : pooled) thresholds.insert(v);
  result.curve.emplace_back(0.0, 0.0);
  long tp = 0, fp = 0;
  auto count_at = [&](double thr) {
    tp = std::count_if(scores_pos.begin(), scores_pos.end(), [&](double v) { return v >= thr; });
    fp = std::count_if(scores_neg.begin(), scores_neg.end(), [&](double v) { return v >= thr; });
  };
  for (double thr : thresholds) {
    count_at(thr);
    result.curve.emplace_back(static_cast<double>(fp) / nn, static_cast<double>(tp) / np);
  }
  return result;
}

RetrievalResult evaluate_retrieval(const SimilarityMatrix& s, const EvalAnnotations& ann) {
  ann.validate(s.n());
  RetrievalResult out;
  double sum = 0.0;
  for (const auto& [q, pn] : ann.queries) {
    if (pn.pos.empty() || pn.neg.empty()) {
      ++out.skipped;
      continue;
    }
    std::vector<double> pos, neg;
    pos.reserve(pn.pos.size());
    neg.reserve(pn.neg.size());
    for (int j : pn.pos) pos.push_back(s.values(q, j));
    for (int j : pn.neg) neg.push_back(s.values(q, j));
    RocResult r = roc_auc(pos, neg);
    r.query = q;
    sum += r.auc;
    out.per_query.push_back(std::move(r));
  }
  if (out.per_query.empty()) throw EmptyInput("no evaluable queries");
  out.mean_auc = sum / static_cast<double>(out.per_query.size());
  return out;
}

std::pair<std::vector<long>, double> reliable_pairs_per_batch(const SimilarityMatrix& s,
                                                              const CliqueAssignment& c,
                                                              const BatchAssignment& x,
                                                              const ReliabilityBands& bands) {
  if (static_cast<int>(x.k()) != c.k()) throw ShapeMismatch("batch/clique count mismatch");
  if (c.n != s.n()) throw ShapeMismatch("clique/similarity size mismatch");
  if (bands.high_cut.size() != s.n()) throw ShapeMismatch("bands size mismatch");

  const auto rows = x.rows_as_indices();
  std::vector<long> counts;
  counts.reserve(rows.size());
  long total = 0;
  for (const auto& row : rows) {
    std::set<int> members;
    for (int clique : row) members.insert(c.cliques[clique].begin(), c.cliques[clique].end());
    const std::vector<int> u(members.begin(), members.end());
    long count = 0;
    for (size_t a = 0; a < u.size(); ++a)
      for (size_t b = a + 1; b < u.size(); ++b)
        if (bands.reliably_similar(s, u[a], u[b]) || bands.reliably_dissimilar(s, u[a], u[b]))
          ++count;
    counts.push_back(count);
    total += count;
  }
  const double mean =
      counts.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(counts.size());
  return {std::move(counts), mean};
}

void save_retrieval_csv(const RetrievalResult& r, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write " + csv_path.string());
  out << "query,auc\n";
  for (const auto& q : r.per_query) out << q.query << ',' << format_f64(q.auc) << '\n';
}

void save_retrieval_summary(const RetrievalResult& r, const std::filesystem::path& json_path) {
  json j;
  j["mean_auc"] = r.mean_auc;
  j["n_queries"] = static_cast<int>(r.per_query.size());
  j["skipped"] = r.skipped;
  std::ofstream out(json_path);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

}  // namespace cbm
