#pragma once

#include <Eigen/Core>

#include "cbm/types.hpp"

namespace cbm {

// Per-row similarity quantiles: scores at or above the high cut are treated
// as reliably similar, at or below the low cut as reliably dissimilar.
// Everything between is noise (only the distribution tails can be trusted).
struct ReliabilityBands {
  double lower_quantile = 0.05;
  double upper_quantile = 0.95;
  Eigen::VectorXd low_cut;
  Eigen::VectorXd high_cut;

  bool reliably_similar(const SimilarityMatrix& s, int i, int j) const {
    return s.values(i, j) >= high_cut(i) && s.values(i, j) >= high_cut(j);
  }
  bool reliably_dissimilar(const SimilarityMatrix& s, int i, int j) const {
    return s.values(i, j) <= low_cut(i) && s.values(i, j) <= low_cut(j);
  }
};

// phi(d_i) = Sigma_sh^(-1/2) (d_i - mu) with the shrunk sample covariance
// Sigma_sh = (1-shrinkage) Sigma + shrinkage (trace(Sigma)/dim) I.
// Eigenvalues are clamped below at 1e-10; throws DegenerateCovariance when
// every eigenvalue sits at the floor.
FeatureMatrix whiten(const FeatureMatrix& features, double shrinkage);

// s_ij = phi_i . phi_j; upper triangle computed, mirrored, exactly symmetric.
SimilarityMatrix similarity_kernel(const FeatureMatrix& phi);

// Pearson correlation of embedding rows; diagonal pinned to 1.
// Throws ZeroVarianceRow for constant rows.
SimilarityMatrix correlation_kernel(const FeatureMatrix& embeddings);

// Per-row quantiles of the off-diagonal scores, linear interpolation of
// order statistics. Requires 0 < lower_q < upper_q < 1.
ReliabilityBands reliability_bands(const SimilarityMatrix& s, double lower_q,
                                   double upper_q);

// k-th entry = sum of the k+1 largest |eigenvalue| over the total; ends at 1.
// Throws ZeroMatrix when the spectrum is identically zero.
Eigen::VectorXd spectrum_cumulative(const SimilarityMatrix& s);

// Number of eigenvalues needed to reach `mass` of the cumulative spectrum.
int spectrum_count_to_mass(const Eigen::VectorXd& cumulative, double mass);

// Linear-interpolation quantile of unsorted values (shared helper).
double quantile(std::vector<double> values, double q);

}  // namespace cbm
