#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

namespace cbm {

// N samples x d features, the exemplar set. ids are optional (empty = none).
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> ids;

  Eigen::Index n_samples() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }

  // Enforces finite entries and unique ids; throws FormatError.
  void validate() const;
};

// Dense symmetric matrix of pairwise scores s_ij.
struct SimilarityMatrix {
  Eigen::MatrixXd values;

  Eigen::Index n() const { return values.rows(); }

  // Symmetry within 1e-9 and finite entries; throws FormatError.
  void validate() const;
};

// Labeled positive/negative sample sets per query exemplar, used only for
// retrieval evaluation, never for training.
struct EvalAnnotations {
  struct PosNeg {
    std::vector<int> pos;
    std::vector<int> neg;
  };
  std::map<int, PosNeg> queries;

  // Index ranges, disjointness, query exclusion; throws FormatError.
  void validate(Eigen::Index n_samples) const;
};

}  // namespace cbm
