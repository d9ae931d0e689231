#include "cbm/synthetic.hpp"

#include <algorithm>

#include "cbm/error.hpp"
#include "cbm/rng.hpp"

namespace cbm {

void SyntheticSpec::validate() const {
  if (n_samples < 1) throw InvalidSpec("n_samples must be positive");
  if (dim < 1) throw InvalidSpec("dim must be positive");
  if (noise_sigma < 0.0) throw InvalidSpec("noise_sigma must be nonnegative");
  if (kind == Kind::gaussian_blobs && n_clusters < 2)
    throw InvalidSpec("gaussian_blobs needs n_clusters >= 2");
  if (kind == Kind::circular_manifold) {
    if (n_clusters < 1) throw InvalidSpec("circular_manifold needs period >= 1");
    if (dim < 2) throw InvalidSpec("circular_manifold needs dim >= 2");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData data;
  data.features.values.resize(spec.n_samples, spec.dim);
  data.labels.resize(spec.n_samples);

  if (spec.kind == SyntheticSpec::Kind::gaussian_blobs) {
    // Centers drawn N(0, I) and scaled to unit norm, so noise_sigma is
    // measured against a fixed cluster separation scale.
    Eigen::MatrixXd centers(spec.n_clusters, spec.dim);
    for (int c = 0; c < spec.n_clusters; ++c) {
      for (int j = 0; j < spec.dim; ++j) centers(c, j) = rng.normal();
      centers.row(c) /= centers.row(c).norm();
    }
    for (int i = 0; i < spec.n_samples; ++i) {
      const int label = static_cast<int>(static_cast<long>(i) * spec.n_clusters / spec.n_samples);
      data.labels[i] = label;
      for (int j = 0; j < spec.dim; ++j)
        data.features.values(i, j) = centers(label, j) + spec.noise_sigma * rng.normal();
    }
  } else {
    const double two_pi = 6.283185307179586476925286766559;
    for (int i = 0; i < spec.n_samples; ++i) {
      const double theta = two_pi * i / spec.n_samples;
      data.labels[i] = static_cast<int>(static_cast<long>(i) * spec.n_clusters / spec.n_samples);
      data.features.values.row(i).setZero();
      data.features.values(i, 0) = std::cos(theta);
      data.features.values(i, 1) = std::sin(theta);
      for (int j = 0; j < spec.dim; ++j)
        data.features.values(i, j) += spec.noise_sigma * rng.normal();
    }
  }
  return data;
}

namespace {

// First `count` elements of a seeded partial Fisher-Yates shuffle, sorted.
std::vector<int> sample_without_replacement(std::vector<int> pool, int count, Rng& rng) {
  const int take = std::min<int>(count, static_cast<int>(pool.size()));
  for (int i = 0; i < take; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_int(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

EvalAnnotations make_annotations(const std::vector<int>& labels, int n_pos, int n_neg,
                                 std::uint64_t seed) {
  if (n_pos < 1 || n_neg < 1) throw InvalidSpec("annotation counts must be positive");
  const int n = static_cast<int>(labels.size());
  Rng rng(seed);
  EvalAnnotations ann;
  for (int q = 0; q < n; ++q) {
    std::vector<int> same, other;
    for (int i = 0; i < n; ++i) {
      if (i == q) continue;
      (labels[i] == labels[q] ? same : other).push_back(i);
    }
    EvalAnnotations::PosNeg pn;
    pn.pos = sample_without_replacement(std::move(same), n_pos, rng);
    pn.neg = sample_without_replacement(std::move(other), n_neg, rng);
    ann.queries.emplace(q, std::move(pn));
  }
  return ann;
}

}  // namespace cbm
