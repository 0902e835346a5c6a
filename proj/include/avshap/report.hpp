#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "avshap/estimators.hpp"
#include "avshap/metrics.hpp"
#include "avshap/run_config.hpp"

namespace avshap {

struct AblationResult {
  Modality modality = Modality::Audio;
  // score(full) - score(full without the modality), per token.
  std::vector<double> delta_logprob_per_token;
  double mean_delta = 0.0;
};

struct UtteranceReport {
  std::string utterance_id;
  std::map<std::string, std::string> tags;
  std::string error;  // empty on success

  std::optional<ShapleyMatrix> matrix;
  std::optional<GlobalBalance> global;
  std::optional<GenerativeTrajectory> generative;
  std::vector<AlignmentMatrix> alignment;
  std::vector<AblationResult> ablation;
  std::optional<double> wer;

  bool ok() const { return error.empty(); }
};

struct AggregateRow {
  std::string group_key;    // "all", snr_db, noise_type, duration_bucket, wer_bucket
  std::string group_value;
  std::string metric;
  std::string index;        // window, modality, "k,w" or empty
  GroupStat stat;
};

struct AnalysisReport {
  std::string mode;
  EstimatorConfig estimator;
  std::vector<UtteranceReport> utterances;  // ordered by utterance id
  std::vector<AggregateRow> aggregates;

  std::size_t error_count() const;
};

// Label of the half-open bucket containing `value` for ascending upper
// edges, e.g. "[0.1,0.2)" or "[0.5,inf)".
std::string bucket_label(double value, const std::vector<double>& upper_edges);
std::string duration_bucket(double seconds, double width);

// Per-group means of the defined per-utterance values.
std::vector<AggregateRow> aggregate(const std::vector<UtteranceReport>& utterances,
                                    const ReportOptions& options);

// Writes report.json and/or the long-format CSV files into `dir`.
// Returns the paths written, sorted.
std::vector<std::filesystem::path> write_report(const AnalysisReport& report,
                                                const std::filesystem::path& dir,
                                                const ReportOptions& options);

void print_summary(const AnalysisReport& report, std::ostream& out);

}  // namespace avshap
