#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <vector>

#include "cbm/similarity.hpp"
#include "cbm/types.hpp"

namespace cbm {

struct CliqueParams {
  // Complete-linkage floor for growth. NaN = derive the floor per step from
  // reliability bands (mean high cut over current members), so cliques only
  // grow through reliably similar pairs.
  double min_similarity = std::numeric_limits<double>::quiet_NaN();
  int max_clique_size = 25;
  int target_k = 100;
  double merge_ratio = 0.5;

  void validate() const;  // throws InvalidSpec
};

// K cliques over N samples; rows of the membership matrix are distinct sets.
struct CliqueAssignment {
  int n = 0;
  std::vector<std::vector<int>> cliques;  // sorted member indices
  std::vector<int> seed_of;               // lowest contributing seed per clique
  std::vector<double> intra;              // mean pairwise similarity (+inf singleton)

  int k() const { return static_cast<int>(cliques.size()); }
  Eigen::MatrixXd membership() const;  // K x N binary matrix C
  void validate() const;
};

struct MergeRecord {
  std::vector<int> members_a;
  std::vector<int> members_b;
  double link = 0.0;  // farthest-neighbor link value min_{i in A, j in B} s_ij
  double intra_a = 0.0;
  double intra_b = 0.0;
  double intra_union = 0.0;
};

struct CliqueBuildResult {
  CliqueAssignment assignment;
  std::vector<MergeRecord> merge_log;  // accepted merges in order
};

// Complete-linkage growth from a seed: repeatedly add the sample maximizing
// the min similarity to all current members, until that value drops below the
// floor or the size cap is hit. Ties break to the lowest index.
// `bands` feeds the adaptive floor and may be null when min_similarity is set.
std::vector<int> grow_clique(const SimilarityMatrix& s, int seed,
                             const CliqueParams& params,
                             const ReliabilityBands* bands = nullptr);

// Mean pairwise similarity over unordered member pairs; +inf for singletons.
double intra_clique_similarity(const SimilarityMatrix& s, const std::vector<int>& members);

// Farthest-neighbor agglomeration over candidate cliques. Duplicates collapse
// first; at each step the acceptable pair with the highest link value merges,
// where a merge is acceptable iff intra(union) >= merge_ratio * min(intra A, intra B).
// Stops when no acceptable merge remains or the clique count reaches target_k.
CliqueBuildResult merge_cliques(const SimilarityMatrix& s,
                                const std::vector<std::vector<int>>& candidates,
                                const CliqueParams& params);

// Grow one candidate per sample, then merge.
CliqueBuildResult build_cliques(const SimilarityMatrix& s, const CliqueParams& params,
                                const ReliabilityBands* bands = nullptr);

// {"k":..., "n":..., "cliques":[[...],...], "seeds":[...], "intra":[...]}
void save_cliques(const CliqueAssignment& c, const std::filesystem::path& path);
CliqueAssignment load_cliques(const std::filesystem::path& path);

}  // namespace cbm
