#include "cbm/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "cbm/error.hpp"

namespace cbm {

void FeatureMatrix::validate() const {
  if (!values.allFinite()) throw FormatError("feature matrix contains NaN/Inf");
  if (!ids.empty()) {
    if (static_cast<Eigen::Index>(ids.size()) != values.rows())
      throw FormatError("id count does not match sample count");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw FormatError("duplicate sample id: " + id);
  }
}

void SimilarityMatrix::validate() const {
  if (values.rows() != values.cols()) throw FormatError("similarity matrix not square");
  if (!values.allFinite()) throw FormatError("similarity matrix contains NaN/Inf");
  const double asym = (values - values.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9) throw FormatError("similarity matrix asymmetric beyond 1e-9");
}

void EvalAnnotations::validate(Eigen::Index n_samples) const {
  for (const auto& [q, pn] : queries) {
    if (q < 0 || q >= n_samples) throw FormatError("annotation query out of range");
    std::unordered_set<int> pos_set;
    for (int i : pn.pos) {
      if (i < 0 || i >= n_samples) throw FormatError("positive index out of range");
      if (i == q) throw FormatError("query listed among its own positives");
      pos_set.insert(i);
    }
    for (int i : pn.neg) {
      if (i < 0 || i >= n_samples) throw FormatError("negative index out of range");
      if (i == q) throw FormatError("query listed among its own negatives");
      if (pos_set.count(i)) throw FormatError("positive/negative sets overlap");
    }
  }
}

}  // namespace cbm
