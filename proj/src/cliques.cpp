#include "cbm/cliques.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>

#include <nlohmann/json.hpp>

#include "cbm/error.hpp"
#include "cbm/parallel.hpp"

namespace cbm {

using json = nlohmann::json;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void CliqueParams::validate() const {
  if (max_clique_size < 1) throw InvalidSpec("max_clique_size must be positive");
  if (target_k < 1) throw InvalidSpec("target_k must be positive");
  if (!(merge_ratio > 0.0 && merge_ratio <= 1.0))
    throw InvalidSpec("merge_ratio must be in (0,1]");
}

Eigen::MatrixXd CliqueAssignment::membership() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k(), n);
  for (int row = 0; row < k(); ++row)
    for (int i : cliques[row]) c(row, i) = 1.0;
  return c;
}

void CliqueAssignment::validate() const {
  std::set<std::vector<int>> seen;
  for (const auto& members : cliques) {
    if (members.empty()) throw FormatError("empty clique");
    for (int i : members)
      if (i < 0 || i >= n) throw FormatError("clique member out of range");
    if (!seen.insert(members).second) throw FormatError("duplicate clique");
  }
  if (seed_of.size() != cliques.size()) throw FormatError("seed_of size mismatch");
}

std::vector<int> grow_clique(const SimilarityMatrix& s, int seed, const CliqueParams& params,
                             const ReliabilityBands* bands) {
  params.validate();
  const Eigen::Index n = s.n();
  if (seed < 0 || seed >= n) throw InvalidSpec("seed out of range");
  const bool adaptive = std::isnan(params.min_similarity);
  if (adaptive && bands == nullptr)
    throw InvalidSpec("adaptive growth floor needs reliability bands");

  std::vector<int> members{seed};
  std::vector<char> taken(n, 0);
  taken[seed] = 1;
  // min over members of s(member, j), updated incrementally
  Eigen::VectorXd min_sim = s.values.row(seed);
  double cut_sum = adaptive ? bands->high_cut(seed) : 0.0;

  while (static_cast<int>(members.size()) < params.max_clique_size) {
    const double floor =
        adaptive ? cut_sum / static_cast<double>(members.size()) : params.min_similarity;
    int best = -1;
    double best_val = -kInf;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (taken[j]) continue;
      if (min_sim(j) > best_val) {
        best_val = min_sim(j);
        best = static_cast<int>(j);
      }
    }
    if (best < 0 || best_val < floor) break;
    members.push_back(best);
    taken[best] = 1;
    min_sim = min_sim.cwiseMin(s.values.row(best).transpose());
    if (adaptive) cut_sum += bands->high_cut(best);
  }
  std::sort(members.begin(), members.end());
  return members;
}

double intra_clique_similarity(const SimilarityMatrix& s, const std::vector<int>& members) {
  if (members.empty()) throw EmptyInput("intra similarity of empty clique");
  if (members.size() == 1) return kInf;
  double sum = 0.0;
  long pairs = 0;
  for (size_t a = 0; a < members.size(); ++a)
    for (size_t b = a + 1; b < members.size(); ++b) {
      sum += s.values(members[a], members[b]);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

namespace {

double link_value(const SimilarityMatrix& s, const std::vector<int>& a,
                  const std::vector<int>& b) {
  double link = kInf;
  for (int i : a)
    for (int j : b) link = std::min(link, s.values(i, j));
  return link;
}

std::vector<int> set_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> u;
  u.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u;
}

struct Node {
  std::vector<int> members;
  double intra = 0.0;
  int min_seed = 0;
  bool alive = true;
};

struct PairEntry {
  double link;
  int a;
  int b;
  bool operator<(const PairEntry& o) const {  // priority_queue: top = best
    if (link != o.link) return link < o.link;
    if (a != o.a) return a > o.a;
    return b > o.b;
  }
};

}  // namespace

CliqueBuildResult merge_cliques(const SimilarityMatrix& s,
                                const std::vector<std::vector<int>>& candidates,
                                const CliqueParams& params) {
  params.validate();
  if (candidates.empty()) throw EmptyInput("no candidate cliques");

  std::vector<Node> nodes;
  std::map<std::vector<int>, int> index_of;  // alive member sets
  for (size_t i = 0; i < candidates.size(); ++i) {
    std::vector<int> members = candidates[i];
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.empty()) throw EmptyInput("empty candidate clique");
    auto it = index_of.find(members);
    if (it != index_of.end()) continue;  // duplicates collapse, lowest seed kept
    index_of.emplace(members, static_cast<int>(nodes.size()));
    nodes.push_back({std::move(members), 0.0, static_cast<int>(i), true});
    nodes.back().intra = intra_clique_similarity(s, nodes.back().members);
  }

  std::priority_queue<PairEntry> heap;
  for (size_t a = 0; a < nodes.size(); ++a)
    for (size_t b = a + 1; b < nodes.size(); ++b)
      heap.push({link_value(s, nodes[a].members, nodes[b].members), static_cast<int>(a),
                 static_cast<int>(b)});

  int alive = static_cast<int>(nodes.size());
  std::set<std::pair<int, int>> rejected;
  CliqueBuildResult result;

  while (alive > params.target_k && !heap.empty()) {
    const PairEntry top = heap.top();
    heap.pop();
    if (!nodes[top.a].alive || !nodes[top.b].alive) continue;
    if (rejected.count({top.a, top.b})) continue;

    const Node& na = nodes[top.a];
    const Node& nb = nodes[top.b];
    std::vector<int> merged = set_union(na.members, nb.members);
    const double intra_u = intra_clique_similarity(s, merged);
    const double ref = std::min(na.intra, nb.intra);
    if (!(intra_u >= params.merge_ratio * ref)) {
      rejected.insert({top.a, top.b});
      continue;
    }

    result.merge_log.push_back(
        {na.members, nb.members, top.link, na.intra, nb.intra, intra_u});
    const int min_seed = std::min(na.min_seed, nb.min_seed);
    index_of.erase(na.members);
    index_of.erase(nb.members);
    nodes[top.a].alive = false;
    nodes[top.b].alive = false;
    alive -= 2;

    auto hit = index_of.find(merged);
    if (hit != index_of.end()) {
      // union coincides with a live clique; fold provenance into it
      Node& host = nodes[hit->second];
      host.min_seed = std::min(host.min_seed, min_seed);
      continue;
    }
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({std::move(merged), intra_u, min_seed, true});
    index_of.emplace(nodes.back().members, id);
    ++alive;
    for (int other = 0; other < id; ++other) {
      if (!nodes[other].alive) continue;
      heap.push({link_value(s, nodes[other].members, nodes[id].members), other, id});
    }
  }

  std::vector<int> order;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].alive) order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return nodes[x].min_seed < nodes[y].min_seed; });

  CliqueAssignment& out = result.assignment;
  out.n = static_cast<int>(s.n());
  for (int id : order) {
    out.cliques.push_back(std::move(nodes[id].members));
    out.seed_of.push_back(nodes[id].min_seed);
    out.intra.push_back(nodes[id].intra);
  }
  out.validate();
  return result;
}

CliqueBuildResult build_cliques(const SimilarityMatrix& s, const CliqueParams& params,
                                const ReliabilityBands* bands) {
  params.validate();
  const Eigen::Index n = s.n();
  if (n < 1) throw EmptyInput("empty similarity matrix");
  std::vector<std::vector<int>> candidates(n);
  parallel_rows(n, [&](long seed) {
    candidates[seed] = grow_clique(s, static_cast<int>(seed), params, bands);
  });
  return merge_cliques(s, candidates, params);
}

void save_cliques(const CliqueAssignment& c, const std::filesystem::path& path) {
  json j;
  j["k"] = c.k();
  j["n"] = c.n;
  j["cliques"] = c.cliques;
  j["seeds"] = c.seed_of;
  json intra = json::array();
  for (double v : c.intra) {
    if (std::isinf(v))
      intra.push_back(nullptr);  // +inf singleton sentinel
    else
      intra.push_back(v);
  }
  j["intra"] = intra;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

CliqueAssignment load_cliques(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad clique JSON: " + std::string(e.what()));
  }
  CliqueAssignment c;
  try {
    c.n = j.at("n").get<int>();
    c.cliques = j.at("cliques").get<std::vector<std::vector<int>>>();
    c.seed_of = j.at("seeds").get<std::vector<int>>();
    if (j.contains("intra")) {
      for (const auto& v : j.at("intra"))
        c.intra.push_back(v.is_null() ? kInf : v.get<double>());
    }
    if (j.at("k").get<int>() != c.k()) throw FormatError("clique count mismatch");
  } catch (const json::exception& e) {
    throw FormatError("bad clique JSON: " + std::string(e.what()));
  }
  for (auto& members : c.cliques) std::sort(members.begin(), members.end());
  c.validate();
  return c;
}

}  // namespace cbm
