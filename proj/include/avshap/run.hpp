#pragma once

#include <ostream>

#include "avshap/report.hpp"
#include "avshap/run_config.hpp"

namespace avshap {

enum class RunMode { Attribute, Sweep, Ablate };

std::string_view to_string(RunMode mode);

// Drops every player of `modality` from the full coalition.
AblationResult ablate_modality(ScoringOracle& oracle, const FeaturePartition& partition,
                               Modality modality);

// Attribute: one utterance (the first by id unless run.utterances selects
// one). Sweep: all of them. Ablate: ablation only, all utterances.
// Per-utterance failures are recorded in the report. Throws ConfigError for
// bad configuration and BridgeError when the scorer is unusable.
AnalysisReport run(const RunConfig& config, RunMode mode);

// run() followed by write_report() into config.out_dir.
AnalysisReport run_and_write(const RunConfig& config, RunMode mode, std::ostream* summary);

}  // namespace avshap
