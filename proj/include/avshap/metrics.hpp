#pragma once

// Modality-balance analyses over a Shapley matrix. All of them work on
// absolute attribution mass |phi|. Ratios whose denominator mass is zero are
// reported as undefined instead of falling back to 0.5 or a uniform row.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "avshap/game.hpp"

namespace avshap {

struct GlobalBalance {
  double a_shap = 0.0;
  double v_shap = 0.0;
  double total_mass = 0.0;
  bool defined = false;
};

GlobalBalance global_shap(const ShapleyMatrix& matrix);

struct GenerativeTrajectory {
  std::vector<IndexRange> windows;  // token ranges
  std::vector<double> a_shap;       // per window, 0 where undefined
  std::vector<double> mass;         // total |phi| per window
  std::vector<bool> defined;

  std::size_t size() const { return windows.size(); }
  double v_shap(std::size_t w) const { return 1.0 - a_shap[w]; }
};

GenerativeTrajectory generative_shap(const ShapleyMatrix& matrix, std::size_t windows);

struct AlignmentMatrix {
  Modality modality = Modality::Audio;
  std::vector<IndexRange> feature_bins;  // absolute player indices
  std::vector<IndexRange> token_bins;
  // K x W, each defined row sums to one. Undefined rows are all zero.
  std::vector<std::vector<double>> h;
  std::vector<bool> row_defined;
  // Present when K == W >= 2 and every row is defined.
  std::optional<double> diagonal_score;

  std::size_t k() const { return feature_bins.size(); }
  std::size_t w() const { return token_bins.size(); }
};

AlignmentMatrix alignment_shap(const ShapleyMatrix& matrix, Modality modality,
                               std::size_t feature_bins, std::size_t token_bins);

// Mean of the diagonal over mean of the off-diagonal entries of a square
// row-stochastic matrix. 1.0 for a uniform matrix; +infinity when every
// off-diagonal entry is zero. This ratio is a local convention.
double diagonal_alignment_score(const std::vector<std::vector<double>>& h);

// Mean over the defined values of a group, with counts.
struct GroupStat {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t count = 0;
  std::size_t undefined = 0;
};

GroupStat aggregate_defined(std::span<const std::optional<double>> values);

}  // namespace avshap
