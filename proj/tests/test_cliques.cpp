#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cbm/cliques.hpp"
#include "cbm/error.hpp"
#include "test_util.hpp"

using namespace cbm;
using Eigen::MatrixXd;

namespace {

SimilarityMatrix sim_from(const MatrixXd& m) {
  SimilarityMatrix s;
  s.values = m;
  return s;
}

// Within 0.9, across 0, diagonal 1; blocks of `size`.
SimilarityMatrix block_similarity(int blocks, int size) {
  const int n = blocks * size;
  MatrixXd m = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = i == j ? 1.0 : (i / size == j / size ? 0.9 : 0.0);
  return sim_from(m);
}

// Random symmetric scores in [0,1] with unit diagonal.
SimilarityMatrix random_similarity(int n, std::uint64_t seed) {
  MatrixXd m = random_symmetric(n, seed, 0.0, 1.0);
  m.diagonal().setConstant(1.0);
  return sim_from(m);
}

double min_pairwise(const SimilarityMatrix& s, const std::vector<int>& members) {
  double lo = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < members.size(); ++a)
    for (size_t b = a + 1; b < members.size(); ++b)
      lo = std::min(lo, s.values(members[a], members[b]));
  return lo;
}

}  // namespace

TEST_CASE("grow_clique matches the subset brute force") {
  MatrixXd m(4, 4);
  m << 1.0, 0.9, 0.9, 0.1,  //
      0.9, 1.0, 0.9, 0.1,   //
      0.9, 0.9, 1.0, 0.1,   //
      0.1, 0.1, 0.1, 1.0;
  const SimilarityMatrix s = sim_from(m);
  CliqueParams params;
  params.min_similarity = 0.5;
  params.max_clique_size = 4;
  const auto grown = grow_clique(s, 0, params);

  // Oracle: largest subset containing 0 whose min pairwise similarity >= 0.5.
  std::vector<int> best;
  for (int mask = 1; mask < 16; ++mask) {
    if (!(mask & 1)) continue;
    std::vector<int> subset;
    for (int i = 0; i < 4; ++i)
      if (mask & (1 << i)) subset.push_back(i);
    if (subset.size() > 1 && min_pairwise(s, subset) < 0.5) continue;
    if (subset.size() > best.size()) best = subset;
  }
  CHECK(best == std::vector<int>{0, 1, 2});
  CHECK(grown == best);
}

TEST_CASE("grow_clique degenerate floors") {
  const SimilarityMatrix s = random_similarity(6, 3);
  CliqueParams params;
  params.min_similarity = 2.0;  // above any off-diagonal score
  CHECK(grow_clique(s, 2, params) == std::vector<int>{2});

  params.min_similarity = -1.0;
  params.max_clique_size = 1;
  CHECK(grow_clique(s, 4, params) == std::vector<int>{4});
}

TEST_CASE("grown cliques keep min pairwise similarity above the floor") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const SimilarityMatrix s = random_similarity(20, seed);
    CliqueParams params;
    params.min_similarity = 0.62;
    params.max_clique_size = 20;
    for (int seed_idx = 0; seed_idx < 20; ++seed_idx) {
      const auto members = grow_clique(s, seed_idx, params);
      if (members.size() > 1) CHECK(min_pairwise(s, members) >= params.min_similarity);
    }
  }
}

TEST_CASE("intra clique similarity") {
  MatrixXd m(3, 3);
  m << 1.0, 0.9, 0.8,  //
      0.9, 1.0, 0.7,   //
      0.8, 0.7, 1.0;
  const SimilarityMatrix s = sim_from(m);
  CHECK(intra_clique_similarity(s, {0, 1}) == 0.9);
  CHECK(intra_clique_similarity(s, {0, 1, 2}) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(std::isinf(intra_clique_similarity(s, {2})));

  const SimilarityMatrix r = random_similarity(10, 5);
  const std::vector<int> members{0, 2, 3, 5, 7, 9};
  double sum = 0.0;
  int cnt = 0;
  for (size_t a = 0; a < members.size(); ++a)
    for (size_t b = a + 1; b < members.size(); ++b) {
      sum += r.values(members[a], members[b]);
      ++cnt;
    }
  CHECK(intra_clique_similarity(r, members) == doctest::Approx(sum / cnt).epsilon(1e-12));
}

TEST_CASE("merge collapses duplicates") {
  const SimilarityMatrix s = random_similarity(5, 9);
  CliqueParams params;
  params.target_k = 1;
  const auto result = merge_cliques(s, {{0, 1, 2}, {2, 1, 0}}, params);
  CHECK(result.assignment.k() == 1);
  CHECK(result.assignment.cliques[0] == std::vector<int>{0, 1, 2});
  CHECK(result.assignment.seed_of[0] == 0);
  CHECK(result.merge_log.empty());
}

TEST_CASE("merge refuses unions below the half-similarity rule") {
  // intra(A) = intra(B) = 0.8; cross pairs 0.08 make intra(union) = 0.32 < 0.4.
  MatrixXd m = MatrixXd::Constant(4, 4, 0.08);
  m.diagonal().setConstant(1.0);
  m(0, 1) = m(1, 0) = 0.8;
  m(2, 3) = m(3, 2) = 0.8;
  const SimilarityMatrix s = sim_from(m);
  CliqueParams params;
  params.target_k = 1;
  params.merge_ratio = 0.5;
  const auto result = merge_cliques(s, {{0, 1}, {2, 3}}, params);
  CHECK(result.assignment.k() == 2);
  CHECK(result.merge_log.empty());

  // Raising the cross similarity above the rule boundary lets the merge through.
  MatrixXd m2 = m;
  for (int i : {0, 1})
    for (int j : {2, 3}) m2(i, j) = m2(j, i) = 0.3;  // union intra = 0.4667
  const auto merged = merge_cliques(sim_from(m2), {{0, 1}, {2, 3}}, params);
  CHECK(merged.assignment.k() == 1);
  REQUIRE(merged.merge_log.size() == 1);
  CHECK(merged.merge_log[0].intra_union >=
        params.merge_ratio * std::min(merged.merge_log[0].intra_a, merged.merge_log[0].intra_b));
}

TEST_CASE("merge keeps the three blocks of a block-diagonal kernel") {
  const SimilarityMatrix s = block_similarity(3, 3);
  const std::vector<std::vector<int>> blocks{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
  CliqueParams params;
  params.target_k = 1;  // only the acceptance rule can stop merging
  const auto result = merge_cliques(s, blocks, params);
  REQUIRE(result.assignment.k() == 3);
  CHECK(result.assignment.cliques == blocks);

  // Oracle: among all balanced 3-way partitions of the 9 samples, the blocks
  // maximize the total intra-clique similarity.
  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  double best_score = -1.0;
  std::set<std::vector<int>> best_partition;
  do {
    if (perm[0] > perm[3] || perm[3] > perm[6]) continue;  // canonical group order
    double score = 0.0;
    std::set<std::vector<int>> partition;
    for (int g = 0; g < 3; ++g) {
      std::vector<int> group{perm[3 * g], perm[3 * g + 1], perm[3 * g + 2]};
      std::sort(group.begin(), group.end());
      score += intra_clique_similarity(s, group);
      partition.insert(group);
    }
    if (score > best_score) {
      best_score = score;
      best_partition = partition;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(best_partition == std::set<std::vector<int>>(blocks.begin(), blocks.end()));
}

TEST_CASE("build_cliques recovers blocks and handles degenerate kernels") {
  const SimilarityMatrix s = block_similarity(3, 3);
  CliqueParams params;
  params.min_similarity = 0.5;
  params.max_clique_size = 9;
  params.target_k = 3;
  const auto result = build_cliques(s, params);
  CHECK(result.assignment.k() == 3);
  CHECK(result.assignment.cliques ==
        std::vector<std::vector<int>>{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}});
  CHECK(result.assignment.seed_of == std::vector<int>{0, 3, 6});

  // No off-diagonal similarity: nothing grows, nothing may merge.
  SimilarityMatrix zero;
  zero.values = MatrixXd::Identity(5, 5);
  CliqueParams singletons;
  singletons.min_similarity = 0.5;
  singletons.target_k = 2;
  const auto lone = build_cliques(zero, singletons);
  CHECK(lone.assignment.k() == 5);
  for (int i = 0; i < 5; ++i) CHECK(lone.assignment.cliques[i] == std::vector<int>{i});

  SimilarityMatrix one;
  one.values = MatrixXd::Constant(1, 1, 1.0);
  CliqueParams tiny;
  tiny.min_similarity = 0.0;
  const auto single = build_cliques(one, tiny);
  CHECK(single.assignment.k() == 1);
  CHECK(single.assignment.cliques[0] == std::vector<int>{0});
}

TEST_CASE("membership matrix is binary with distinct rows covering the cliques") {
  const SimilarityMatrix s = random_similarity(15, 21);
  CliqueParams params;
  params.min_similarity = 0.55;
  params.max_clique_size = 6;
  params.target_k = 4;
  const auto result = build_cliques(s, params);
  const MatrixXd c = result.assignment.membership();
  CHECK(((c.array() == 0.0) || (c.array() == 1.0)).all());
  std::set<std::vector<int>> rows(result.assignment.cliques.begin(),
                                  result.assignment.cliques.end());
  CHECK(rows.size() == result.assignment.cliques.size());
  for (int row = 0; row < result.assignment.k(); ++row)
    CHECK(c.row(row).sum() == doctest::Approx(result.assignment.cliques[row].size()));
}

TEST_CASE("accepted merges replay against the half-similarity rule") {
  for (std::uint64_t seed : {31u, 32u, 33u, 34u}) {
    const SimilarityMatrix s = random_similarity(18, seed);
    CliqueParams params;
    params.min_similarity = 0.5;
    params.max_clique_size = 8;
    params.target_k = 2;
    const auto result = build_cliques(s, params);
    for (const auto& rec : result.merge_log) {
      std::vector<int> u;
      std::set_union(rec.members_a.begin(), rec.members_a.end(), rec.members_b.begin(),
                     rec.members_b.end(), std::back_inserter(u));
      const double replayed = intra_clique_similarity(s, u);
      CHECK(replayed == doctest::Approx(rec.intra_union).epsilon(1e-12));
      CHECK(replayed >= params.merge_ratio * std::min(rec.intra_a, rec.intra_b) - 1e-12);
    }
  }
}

TEST_CASE("identical inputs build identical cliques") {
  const SimilarityMatrix s = random_similarity(16, 41);
  CliqueParams params;
  params.min_similarity = 0.6;
  params.max_clique_size = 5;
  params.target_k = 5;
  const auto a = build_cliques(s, params);
  const auto b = build_cliques(s, params);
  CHECK(a.assignment.cliques == b.assignment.cliques);
  CHECK(a.assignment.seed_of == b.assignment.seed_of);
  CHECK(a.assignment.intra == b.assignment.intra);
}

TEST_CASE("clique JSON round trip") {
  const SimilarityMatrix s = block_similarity(2, 3);
  CliqueParams params;
  params.min_similarity = 0.5;
  params.target_k = 2;
  auto built = build_cliques(s, params);
  built.assignment.intra.back() = std::numeric_limits<double>::infinity();  // exercise sentinel

  TempDir dir("cliques");
  save_cliques(built.assignment, dir / "c.json");
  const auto back = load_cliques(dir / "c.json");
  CHECK(back.cliques == built.assignment.cliques);
  CHECK(back.seed_of == built.assignment.seed_of);
  CHECK(back.n == built.assignment.n);
  REQUIRE(back.intra.size() == built.assignment.intra.size());
  CHECK(std::isinf(back.intra.back()));
}
