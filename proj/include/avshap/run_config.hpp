#pragma once

// Run configuration: where scores come from (toy games or a bridged
// adapter), how to estimate, which analyses to derive and how to report.
// Schema: docs/config.md.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "avshap/bridge.hpp"
#include "avshap/estimators.hpp"
#include "avshap/keyvalue.hpp"
#include "avshap/protocol.hpp"
#include "avshap/toy_games.hpp"

namespace avshap {

struct AlignmentRequest {
  Modality modality = Modality::Audio;
  std::size_t feature_bins = 3;
  std::size_t token_bins = 3;
};

struct AnalysisSet {
  bool global = false;
  std::optional<std::size_t> generative_windows;
  std::vector<AlignmentRequest> alignment;
  bool ablation = false;

  bool any() const { return global || generative_windows || !alignment.empty() || ablation; }
  bool needs_shapley() const { return global || generative_windows || !alignment.empty(); }
};

struct ReportOptions {
  // Upper edges of the WER buckets; the last bucket is open-ended.
  std::vector<double> wer_edges{0.1, 0.2, 0.3, 0.5};
  double duration_bucket_s = 1.0;
  bool csv = true;
  bool json = true;
};

// Toy games described in the config document: a base [toy] spec, optionally
// expanded over an SNR x seed grid from [sweep].
struct ToySource {
  KvDocument doc;
};

struct ToyUtterance {
  UtteranceManifest manifest;
  ToyGameSpec spec;
};

// The base utterance alone (grid = false) or the full sweep grid. Ids are
// zero-padded so that lexical order equals grid order.
std::vector<ToyUtterance> toy_utterances(const KvDocument& doc, bool grid);

struct RunConfig {
  std::variant<ToySource, BridgeConfig> oracle;
  std::vector<std::string> utterance_filter;
  EstimatorConfig estimator;
  AnalysisSet analyses;
  ReportOptions report;
  std::filesystem::path out_dir = "avshap-report";
  // Utterance worker pool size; 0 selects the hardware concurrency.
  std::size_t workers = 0;

  void validate() const;
};

RunConfig parse_run_config(const KvDocument& doc);
RunConfig load_run_config(const std::string& path);

BridgeConfig read_bridge_config(const KvDocument& doc, const std::string& section = "bridge");

}  // namespace avshap
