#include "cbm/similarity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbm/error.hpp"
#include "cbm/parallel.hpp"

namespace cbm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kEigenFloor = 1e-10;
}

FeatureMatrix whiten(const FeatureMatrix& features, double shrinkage) {
  if (features.n_samples() < 2) throw InvalidSpec("whiten needs at least 2 samples");
  if (shrinkage < 0.0 || shrinkage > 1.0) throw InvalidSpec("shrinkage must be in [0,1]");
  const MatrixXd& x = features.values;
  const Eigen::Index n = x.rows(), d = x.cols();

  const Eigen::RowVectorXd mu = x.colwise().mean();
  const MatrixXd centered = x.rowwise() - mu;
  const MatrixXd sigma = centered.transpose() * centered / static_cast<double>(n - 1);
  const double iso = sigma.trace() / static_cast<double>(d);
  MatrixXd shrunk = (1.0 - shrinkage) * sigma;
  shrunk.diagonal().array() += shrinkage * iso;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(shrunk);
  if (eig.info() != Eigen::Success) throw EigenFailure("covariance eigendecomposition failed");
  VectorXd lambda = eig.eigenvalues().cwiseMax(kEigenFloor);
  if ((lambda.array() <= kEigenFloor).all())
    throw DegenerateCovariance("covariance spectrum entirely at the clamp floor");

  const MatrixXd w =
      eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  FeatureMatrix out;
  out.values = centered * w;
  out.ids = features.ids;
  return out;
}

SimilarityMatrix similarity_kernel(const FeatureMatrix& phi) {
  const MatrixXd& x = phi.values;
  const Eigen::Index n = x.rows();
  SimilarityMatrix s;
  s.values.resize(n, n);
  MatrixXd& v = s.values;
  parallel_rows(n, [&](long i) {
    for (Eigen::Index j = i; j < n; ++j) v(i, j) = x.row(i).dot(x.row(j));
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) v(i, j) = v(j, i);
  return s;
}

SimilarityMatrix correlation_kernel(const FeatureMatrix& embeddings) {
  const MatrixXd& x = embeddings.values;
  const Eigen::Index n = x.rows();
  MatrixXd centered = x.colwise() - x.rowwise().mean();
  VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    norms(i) = centered.row(i).norm();
    if (norms(i) == 0.0) throw ZeroVarianceRow(static_cast<int>(i));
  }
  SimilarityMatrix s;
  s.values.resize(n, n);
  MatrixXd& v = s.values;
  parallel_rows(n, [&](long i) {
    v(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = centered.row(i).dot(centered.row(j)) / (norms(i) * norms(j));
      v(i, j) = std::clamp(r, -1.0, 1.0);
    }
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) v(i, j) = v(j, i);
  return s;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyInput("quantile of no values");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

ReliabilityBands reliability_bands(const SimilarityMatrix& s, double lower_q, double upper_q) {
  if (!(lower_q > 0.0 && lower_q < upper_q && upper_q < 1.0))
    throw InvalidSpec("need 0 < lower_q < upper_q < 1");
  const Eigen::Index n = s.n();
  ReliabilityBands bands;
  bands.lower_quantile = lower_q;
  bands.upper_quantile = upper_q;
  bands.low_cut.resize(n);
  bands.high_cut.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row;
    row.reserve(n > 0 ? n - 1 : 0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) row.push_back(s.values(i, j));
    if (row.empty()) {  // 1x1 matrix: no off-diagonal scores
      bands.low_cut(i) = -std::numeric_limits<double>::infinity();
      bands.high_cut(i) = std::numeric_limits<double>::infinity();
      continue;
    }
    bands.low_cut(i) = quantile(row, lower_q);
    bands.high_cut(i) = quantile(row, upper_q);
  }
  return bands;
}

VectorXd spectrum_cumulative(const SimilarityMatrix& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s.values, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw EigenFailure("spectrum eigendecomposition failed");
  std::vector<double> mags(eig.eigenvalues().size());
  for (size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(eig.eigenvalues()(i));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  const double total = std::accumulate(mags.begin(), mags.end(), 0.0);
  if (total == 0.0) throw ZeroMatrix("similarity spectrum is identically zero");
  VectorXd out(static_cast<Eigen::Index>(mags.size()));
  double running = 0.0;
  for (size_t i = 0; i < mags.size(); ++i) {
    running += mags[i];
    out(static_cast<Eigen::Index>(i)) = running / total;
  }
  out(out.size() - 1) = 1.0;
  return out;
}

int spectrum_count_to_mass(const VectorXd& cumulative, double mass) {
  for (Eigen::Index i = 0; i < cumulative.size(); ++i)
    if (cumulative(i) >= mass) return static_cast<int>(i) + 1;
  return static_cast<int>(cumulative.size());
}

}  // namespace cbm
