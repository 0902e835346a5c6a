#include "avshap/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "avshap/error.hpp"

namespace avshap {
namespace {

double abs_mass(const ShapleyMatrix& m, IndexRange players, IndexRange tokens) {
  double sum = 0.0;
  for (std::size_t p = players.begin; p < players.end; ++p) {
    for (std::size_t t = tokens.begin; t < tokens.end; ++t) sum += std::abs(m.at(p, t));
  }
  return sum;
}

}  // namespace

GlobalBalance global_shap(const ShapleyMatrix& matrix) {
  const auto& part = matrix.partition();
  const IndexRange all_tokens{0, matrix.t_len()};
  const double audio = abs_mass(matrix, part.players(Modality::Audio), all_tokens);
  const double video = abs_mass(matrix, part.players(Modality::Video), all_tokens);
  GlobalBalance g;
  g.total_mass = audio + video;
  if (g.total_mass > 0.0) {
    g.defined = true;
    g.a_shap = audio / g.total_mass;
    g.v_shap = 1.0 - g.a_shap;
  }
  return g;
}

GenerativeTrajectory generative_shap(const ShapleyMatrix& matrix, std::size_t windows) {
  if (windows == 0 || windows > matrix.t_len()) {
    throw MetricError("window count " + std::to_string(windows) + " must be in [1, T=" +
                      std::to_string(matrix.t_len()) + "]");
  }
  const auto& part = matrix.partition();
  GenerativeTrajectory out;
  out.windows = split_contiguous(matrix.t_len(), windows);
  for (const auto& win : out.windows) {
    const double audio = abs_mass(matrix, part.players(Modality::Audio), win);
    const double total = audio + abs_mass(matrix, part.players(Modality::Video), win);
    out.mass.push_back(total);
    out.defined.push_back(total > 0.0);
    out.a_shap.push_back(total > 0.0 ? audio / total : 0.0);
  }
  return out;
}

AlignmentMatrix alignment_shap(const ShapleyMatrix& matrix, Modality modality,
                               std::size_t feature_bins, std::size_t token_bins) {
  const IndexRange players = matrix.partition().players(modality);
  if (feature_bins == 0 || feature_bins > players.size()) {
    throw MetricError("feature bin count " + std::to_string(feature_bins) + " must be in [1, " +
                      std::to_string(players.size()) + "] for " +
                      std::string(to_string(modality)) + " players");
  }
  if (token_bins == 0 || token_bins > matrix.t_len()) {
    throw MetricError("token bin count " + std::to_string(token_bins) + " must be in [1, T=" +
                      std::to_string(matrix.t_len()) + "]");
  }
  AlignmentMatrix out;
  out.modality = modality;
  for (auto r : split_contiguous(players.size(), feature_bins)) {
    out.feature_bins.push_back({players.begin + r.begin, players.begin + r.end});
  }
  out.token_bins = split_contiguous(matrix.t_len(), token_bins);

  bool all_defined = true;
  for (const auto& fb : out.feature_bins) {
    std::vector<double> row;
    double total = 0.0;
    for (const auto& tb : out.token_bins) {
      row.push_back(abs_mass(matrix, fb, tb));
      total += row.back();
    }
    const bool defined = total > 0.0;
    for (auto& v : row) v = defined ? v / total : 0.0;
    out.h.push_back(std::move(row));
    out.row_defined.push_back(defined);
    all_defined = all_defined && defined;
  }
  if (feature_bins == token_bins && feature_bins >= 2 && all_defined) {
    out.diagonal_score = diagonal_alignment_score(out.h);
  }
  return out;
}

double diagonal_alignment_score(const std::vector<std::vector<double>>& h) {
  const std::size_t k = h.size();
  if (k < 2) throw MetricError("diagonal alignment score needs a square matrix with K >= 2");
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (h[i].size() != k) throw MetricError("diagonal alignment score needs a square matrix");
    for (std::size_t j = 0; j < k; ++j) (i == j ? diag : off) += h[i][j];
  }
  const double diag_mean = diag / static_cast<double>(k);
  const double off_mean = off / static_cast<double>(k * (k - 1));
  if (off_mean == 0.0) return std::numeric_limits<double>::infinity();
  return diag_mean / off_mean;
}

GroupStat aggregate_defined(std::span<const std::optional<double>> values) {
  GroupStat g;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++g.count;
    } else {
      ++g.undefined;
    }
  }
  if (g.count == 0) return g;
  g.mean = sum / static_cast<double>(g.count);
  double sq = 0.0;
  for (const auto& v : values) {
    if (v) sq += (*v - g.mean) * (*v - g.mean);
  }
  g.stddev = std::sqrt(sq / static_cast<double>(g.count));
  return g;
}

}  // namespace avshap
