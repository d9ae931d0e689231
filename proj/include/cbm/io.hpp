#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cbm/types.hpp"

namespace cbm {

enum class FeatureFormat { csv, f64_binary };

// CSV: comma separated, one sample per row, optional header (detected by a
// non-numeric first row). f64_binary: magic "CBM1", two little-endian u64
// (n_samples, dim), then row-major little-endian f64.
FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format);
void save_features(const FeatureMatrix& m, const std::filesystem::path& path,
                   FeatureFormat format);

// Magic "CBS1", little-endian u64 n, row-major little-endian f64.
SimilarityMatrix load_similarity(const std::filesystem::path& path);
void save_similarity(const SimilarityMatrix& s, const std::filesystem::path& path);

// JSON object mapping query index (string) to {"pos": [...], "neg": [...]}.
EvalAnnotations load_annotations(const std::filesystem::path& path);
void save_annotations(const EvalAnnotations& ann, const std::filesystem::path& path);

// One integer label per line.
std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<int>& labels, const std::filesystem::path& path);

// Shortest-exact decimal formatting used by every CSV artifact ("%.17g").
std::string format_f64(double v);

}  // namespace cbm
