#include "avshap/run.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "avshap/error.hpp"
#include "avshap/rng.hpp"
#include "avshap/wer.hpp"

namespace avshap {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TokenScores checked_score(ScoringOracle& oracle, const CoalitionMask& mask) {
  TokenScores s = oracle.score(mask);
  if (s.size() != oracle.t_len()) {
    throw ScoreError("oracle returned " + std::to_string(s.size()) + " scores, expected " +
                     std::to_string(oracle.t_len()) + " for mask " + mask.to_string());
  }
  for (double v : s) {
    if (!std::isfinite(v)) throw ScoreError("oracle returned a non-finite score for mask " + mask.to_string());
  }
  return s;
}

// Re-scores the endpoints and insists on bit-identical results.
void probe_determinism(ScoringOracle& oracle, const ShapleyMatrix& m) {
  const std::size_t n = m.n_players();
  if (checked_score(oracle, CoalitionMask::empty(n)) != m.baseline ||
      checked_score(oracle, CoalitionMask::full(n)) != m.full) {
    throw ScoreError("oracle is not deterministic: endpoint scores changed between calls");
  }
}

std::vector<std::string> select(std::vector<std::string> ids, const RunConfig& config, RunMode mode) {
  std::sort(ids.begin(), ids.end());
  if (!config.utterance_filter.empty()) {
    std::vector<std::string> kept;
    for (const auto& want : config.utterance_filter) {
      if (std::find(ids.begin(), ids.end(), want) == ids.end()) {
        throw ConfigError("requested utterance '" + want + "' does not exist");
      }
    }
    for (const auto& id : ids) {
      if (std::find(config.utterance_filter.begin(), config.utterance_filter.end(), id) !=
          config.utterance_filter.end()) {
        kept.push_back(id);
      }
    }
    ids = std::move(kept);
  }
  if (ids.empty()) throw ConfigError("no utterances to process");
  if (mode == RunMode::Attribute) ids.resize(1);
  return ids;
}

UtteranceReport failed(const UtteranceManifest& manifest, std::string message) {
  UtteranceReport r;
  r.utterance_id = manifest.utterance_id;
  r.tags = manifest.tags;
  r.error = std::move(message);
  return r;
}

UtteranceReport process_utterance(ScoringOracle& oracle, const UtteranceManifest& manifest,
                                  const RunConfig& config, RunMode mode) {
  UtteranceReport r;
  r.utterance_id = manifest.utterance_id;
  r.tags = manifest.tags;
  try {
    const FeaturePartition partition = manifest.partition();
    if (oracle.t_len() != manifest.t_len) throw ScoreError("oracle token count disagrees with manifest");
    const auto& a = config.analyses;
    if (mode != RunMode::Ablate && a.needs_shapley()) {
      EstimatorConfig est = config.estimator;
      est.seed = derive_seed(config.estimator.seed, fnv1a(manifest.utterance_id));
      ShapleyMatrix m = estimate(oracle, partition, est);
      probe_determinism(oracle, m);
      if (a.global) r.global = global_shap(m);
      if (a.generative_windows) r.generative = generative_shap(m, *a.generative_windows);
      for (const auto& req : a.alignment) {
        r.alignment.push_back(alignment_shap(m, req.modality, req.feature_bins, req.token_bins));
      }
      r.matrix = std::move(m);
    }
    if (mode == RunMode::Ablate || a.ablation) {
      for (Modality mod : {Modality::Audio, Modality::Video}) {
        if (partition.players(mod).size() > 0) {
          r.ablation.push_back(ablate_modality(oracle, partition, mod));
        }
      }
    }
    if (auto ref = manifest.tags.find("reference"); ref != manifest.tags.end()) {
      std::string hyp;
      if (auto h = manifest.tags.find("hypothesis"); h != manifest.tags.end()) {
        hyp = h->second;
      } else {
        for (const auto& t : manifest.tokens) hyp += (hyp.empty() ? "" : " ") + t;
      }
      r.wer = wer(ref->second, hyp);
    }
  } catch (const ScoreError& e) {
    r = failed(manifest, e.what());
  } catch (const MetricError& e) {
    r = failed(manifest, e.what());
  } catch (const EstimatorError& e) {
    r = failed(manifest, e.what());
  } catch (const PartitionError& e) {
    r = failed(manifest, e.what());
  }
  if (!r.ok() && r.error.empty()) r.error = "unknown failure";
  return r;
}

std::size_t pool_size(const RunConfig& config, std::size_t jobs) {
  std::size_t n = config.workers;
  if (n == 0) n = std::max(1U, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs job(worker, index) for every index on a pool; each index is handled
// exactly once. The first exception stops the pool and is rethrown.
template <typename Init, typename Job>
void run_pool(std::size_t workers, std::size_t jobs, Init init, Job job) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&](std::size_t w) {
    try {
      auto state = init(w);
      while (!stop) {
        const std::size_t i = next++;
        if (i >= jobs) break;
        job(state, i);
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      stop = true;
    }
  };
  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Attribute: return "attribute";
    case RunMode::Sweep: return "sweep";
    case RunMode::Ablate: return "ablate";
  }
  return "unknown";
}

AblationResult ablate_modality(ScoringOracle& oracle, const FeaturePartition& partition,
                               Modality modality) {
  const IndexRange players = partition.players(modality);
  if (players.size() == 0) {
    throw MetricError("cannot ablate " + std::string(to_string(modality)) +
                      ": partition has no players of that modality");
  }
  const auto full_mask = CoalitionMask::full(partition.n_players());
  auto dropped = full_mask;
  for (std::size_t p = players.begin; p < players.end; ++p) dropped.set(p, false);
  const TokenScores with = checked_score(oracle, full_mask);
  const TokenScores without = checked_score(oracle, dropped);
  AblationResult r;
  r.modality = modality;
  double sum = 0.0;
  for (std::size_t t = 0; t < with.size(); ++t) {
    r.delta_logprob_per_token.push_back(with[t] - without[t]);
    sum += r.delta_logprob_per_token.back();
  }
  r.mean_delta = sum / static_cast<double>(with.size());
  return r;
}

AnalysisReport run(const RunConfig& config, RunMode mode) {
  config.validate();
  AnalysisReport report;
  report.mode = std::string(to_string(mode));
  report.estimator = config.estimator;

  if (const auto* toy = std::get_if<ToySource>(&config.oracle)) {
    auto all = toy_utterances(toy->doc, mode != RunMode::Attribute);
    std::vector<std::string> ids;
    for (const auto& u : all) ids.push_back(u.manifest.utterance_id);
    ids = select(ids, config, mode);
    std::vector<const ToyUtterance*> chosen;
    for (const auto& id : ids) {
      for (const auto& u : all) {
        if (u.manifest.utterance_id == id) chosen.push_back(&u);
      }
    }
    report.utterances.resize(chosen.size());
    run_pool(
        pool_size(config, chosen.size()), chosen.size(), [](std::size_t) { return 0; },
        [&](int, std::size_t i) {
          ToyOracle oracle(chosen[i]->spec);
          report.utterances[i] = process_utterance(oracle, chosen[i]->manifest, config, mode);
        });
  } else {
    const auto& bridge = std::get<BridgeConfig>(config.oracle);
    auto first = BridgeClient::connect(bridge);
    first->handshake();
    std::vector<std::string> ids;
    for (const auto& m : first->manifests()) ids.push_back(m.utterance_id);
    ids = select(ids, config, mode);
    report.utterances.resize(ids.size());
    // One connection per worker; worker 0 reuses the handshake connection.
    std::mutex first_mu;
    run_pool(
        pool_size(config, ids.size()), ids.size(),
        [&](std::size_t w) {
          if (w == 0) {
            std::lock_guard lock(first_mu);
            return std::move(first);
          }
          auto c = BridgeClient::connect(bridge);
          c->handshake();
          return c;
        },
        [&](std::unique_ptr<BridgeClient>& client, std::size_t i) {
          BridgedOracle oracle(*client, ids[i]);
          report.utterances[i] = process_utterance(oracle, oracle.manifest(), config, mode);
        });
  }
  report.aggregates = aggregate(report.utterances, config.report);
  return report;
}

AnalysisReport run_and_write(const RunConfig& config, RunMode mode, std::ostream* summary) {
  AnalysisReport report = run(config, mode);
  write_report(report, config.out_dir, config.report);
  if (summary) print_summary(report, *summary);
  return report;
}

}  // namespace avshap
