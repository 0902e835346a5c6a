#include "avshap/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "avshap/error.hpp"

namespace avshap {
namespace {

void reject_unknown(const KvDocument& doc, const std::string& section,
                    const std::set<std::string>& known) {
  const auto* t = doc.section(section);
  if (!t) return;
  for (const auto& [k, v] : *t) {
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in [" + section + "]");
  }
}

std::size_t get_size(const KvDocument& doc, const std::string& section, const std::string& key,
                     std::size_t dflt) {
  const auto* v = doc.find(section, key);
  return v ? static_cast<std::size_t>(v->as_uint(section + "." + key)) : dflt;
}

std::string tag_number(double d) { return format_double(d); }

}  // namespace

std::vector<ToyUtterance> toy_utterances(const KvDocument& doc, bool grid) {
  const ToyGameSpec base = read_toy_spec(doc, "toy");
  reject_unknown(doc, "sweep", {"snr_db", "seeds"});

  std::string base_id = "toy";
  std::vector<std::string> tokens;
  std::map<std::string, std::string> tags;
  if (const auto* t = doc.section("utterance")) {
    for (const auto& [k, v] : *t) {
      if (k == "id") {
        base_id = v.as_string("utterance.id");
      } else if (k == "tokens") {
        tokens = v.as_string_vector("utterance.tokens");
      } else if (v.is_string()) {
        tags[k] = v.as_string("utterance." + k);
      } else {
        tags[k] = v.to_text();
      }
    }
  }
  if (!tokens.empty() && tokens.size() != base.t_len) {
    throw ConfigError("utterance.tokens lists " + std::to_string(tokens.size()) +
                      " tokens but toy.t_len is " + std::to_string(base.t_len));
  }
  if (tokens.empty()) {
    for (std::size_t t = 0; t < base.t_len; ++t) tokens.push_back("t" + std::to_string(t));
  }

  std::vector<double> snrs;
  std::vector<std::uint64_t> seeds;
  if (grid) {
    if (const auto* v = doc.find("sweep", "snr_db")) snrs = v->as_double_vector("sweep.snr_db");
    if (const auto* v = doc.find("sweep", "seeds")) {
      for (const auto& s : v->as_array("sweep.seeds")) seeds.push_back(s.as_uint("sweep.seeds"));
    }
  }
  const bool snr_axis = !snrs.empty();
  if (snrs.empty()) snrs.push_back(base.snr_db);
  if (seeds.empty()) seeds.push_back(base.seed);

  const std::size_t count = snrs.size() * seeds.size();
  const std::size_t width = std::to_string(count - 1).size();
  std::vector<ToyUtterance> out;
  for (std::size_t si = 0; si < snrs.size(); ++si) {
    for (std::size_t ki = 0; ki < seeds.size(); ++ki) {
      ToyUtterance u;
      u.spec = base;
      u.spec.snr_db = snrs[si];
      u.spec.seed = seeds[ki];
      u.spec.validate();
      auto& m = u.manifest;
      if (count == 1) {
        m.utterance_id = base_id;
      } else {
        std::string idx = std::to_string(out.size());
        idx.insert(0, width - idx.size(), '0');
        m.utterance_id = base_id + "-" + idx;
      }
      m.n_audio = base.partition.n_audio();
      m.n_video = base.partition.n_video();
      m.audio_group_size = base.partition.audio_group_size();
      m.video_group_size = base.partition.video_group_size();
      m.t_len = base.t_len;
      m.tokens = tokens;
      m.tags = tags;
      m.tags["toy_kind"] = std::string(to_string(base.kind));
      m.tags["seed"] = std::to_string(u.spec.seed);
      if (snr_axis || base.kind == ToyKind::SnrMixture) m.tags["snr_db"] = tag_number(u.spec.snr_db);
      out.push_back(std::move(u));
    }
  }
  return out;
}

BridgeConfig read_bridge_config(const KvDocument& doc, const std::string& section) {
  reject_unknown(doc, section,
                 {"transport", "command", "args", "host", "port", "handshake_timeout_ms",
                  "call_timeout_ms", "max_batch"});
  BridgeConfig c;
  const auto* tv = doc.find(section, "transport");
  const std::string transport = tv ? tv->as_string(section + ".transport") : "stdio";
  if (transport == "stdio") {
    StdioEndpoint s;
    if (const auto* v = doc.find(section, "command")) s.command = v->as_string(section + ".command");
    if (const auto* v = doc.find(section, "args")) s.args = v->as_string_vector(section + ".args");
    c.transport = s;
  } else if (transport == "tcp") {
    TcpEndpoint t;
    if (const auto* v = doc.find(section, "host")) t.host = v->as_string(section + ".host");
    const auto port = get_size(doc, section, "port", 0);
    if (port > 65535) throw ConfigError(section + ".port out of range");
    t.port = static_cast<std::uint16_t>(port);
    c.transport = t;
  } else {
    throw ConfigError("unknown bridge transport '" + transport + "' (expected stdio or tcp)");
  }
  c.handshake_timeout_ms =
      static_cast<int>(get_size(doc, section, "handshake_timeout_ms", c.handshake_timeout_ms));
  c.call_timeout_ms = static_cast<int>(get_size(doc, section, "call_timeout_ms", c.call_timeout_ms));
  c.max_batch = get_size(doc, section, "max_batch", c.max_batch);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (!analyses.any()) throw ConfigError("at least one analysis must be requested");
  estimator.validate();
  if (report.duration_bucket_s <= 0.0 || !std::isfinite(report.duration_bucket_s)) {
    throw ConfigError("duration bucket width must be positive");
  }
  if (!std::is_sorted(report.wer_edges.begin(), report.wer_edges.end())) {
    throw ConfigError("wer_edges must be ascending");
  }
  if (!report.csv && !report.json) throw ConfigError("at least one report format is required");
  if (analyses.generative_windows && *analyses.generative_windows == 0) {
    throw ConfigError("generative windows must be at least 1");
  }
  for (const auto& a : analyses.alignment) {
    if (a.feature_bins == 0 || a.token_bins == 0) throw ConfigError("alignment bins must be >= 1");
  }
  if (const auto* toy = std::get_if<ToySource>(&oracle)) {
    // Bounds are known up front for toy games.
    const ToyGameSpec spec = read_toy_spec(toy->doc, "toy");
    if (analyses.generative_windows && *analyses.generative_windows > spec.t_len) {
      throw ConfigError("generative windows exceed toy t_len");
    }
    for (const auto& a : analyses.alignment) {
      if (a.token_bins > spec.t_len) throw ConfigError("alignment token_bins exceed toy t_len");
      if (a.feature_bins > spec.partition.players(a.modality).size()) {
        throw ConfigError("alignment feature_bins exceed the " +
                          std::string(to_string(a.modality)) + " player count");
      }
    }
  } else {
    std::get<BridgeConfig>(oracle).validate();
  }
}

RunConfig parse_run_config(const KvDocument& doc) {
  for (const auto& [name, table] : doc.sections()) {
    static const std::set<std::string> sections = {"run",   "estimator", "generative", "alignment",
                                                   "report", "oracle",   "toy",        "utterance",
                                                   "sweep",  "bridge"};
    if (!sections.count(name)) {
      throw ConfigError(name.empty() ? "keys outside of a section are not allowed"
                                     : "unknown section [" + name + "]");
    }
  }
  reject_unknown(doc, "run", {"analyses", "out", "formats", "workers", "utterances"});
  reject_unknown(doc, "estimator",
                 {"method", "budget", "seed", "batch_size", "workers", "exact_cap"});
  reject_unknown(doc, "generative", {"windows"});
  reject_unknown(doc, "alignment", {"modalities", "feature_bins", "token_bins"});
  reject_unknown(doc, "report", {"wer_edges", "duration_bucket_s"});
  reject_unknown(doc, "oracle", {"source"});

  RunConfig c;
  const auto* analyses = doc.find("run", "analyses");
  if (!analyses) throw ConfigError("[run] analyses is required");
  for (const auto& name : analyses->as_string_vector("run.analyses")) {
    if (name == "global") {
      c.analyses.global = true;
    } else if (name == "generative") {
      c.analyses.generative_windows = get_size(doc, "generative", "windows", 3);
    } else if (name == "alignment") {
      std::vector<std::string> mods{"audio", "video"};
      if (const auto* v = doc.find("alignment", "modalities")) {
        mods = v->as_string_vector("alignment.modalities");
      }
      for (const auto& m : mods) {
        AlignmentRequest r;
        try {
          r.modality = parse_modality(m);
        } catch (const PartitionError& e) {
          throw ConfigError(e.what());
        }
        r.feature_bins = get_size(doc, "alignment", "feature_bins", 3);
        r.token_bins = get_size(doc, "alignment", "token_bins", 3);
        c.analyses.alignment.push_back(r);
      }
    } else if (name == "ablation") {
      c.analyses.ablation = true;
    } else {
      throw ConfigError("unknown analysis '" + name +
                        "' (expected global, generative, alignment or ablation)");
    }
  }
  if (const auto* v = doc.find("run", "out")) c.out_dir = v->as_string("run.out");
  if (const auto* v = doc.find("run", "formats")) {
    c.report.csv = c.report.json = false;
    for (const auto& f : v->as_string_vector("run.formats")) {
      if (f == "csv") {
        c.report.csv = true;
      } else if (f == "json") {
        c.report.json = true;
      } else {
        throw ConfigError("unknown report format '" + f + "' (expected csv or json)");
      }
    }
  }
  c.workers = get_size(doc, "run", "workers", 0);
  if (const auto* v = doc.find("run", "utterances")) {
    c.utterance_filter = v->as_string_vector("run.utterances");
  }

  if (const auto* v = doc.find("estimator", "method")) {
    c.estimator.method = parse_method(v->as_string("estimator.method"));
  }
  c.estimator.budget_m = get_size(doc, "estimator", "budget", c.estimator.budget_m);
  if (const auto* v = doc.find("estimator", "seed")) c.estimator.seed = v->as_uint("estimator.seed");
  c.estimator.batch_size = get_size(doc, "estimator", "batch_size", c.estimator.batch_size);
  c.estimator.workers = get_size(doc, "estimator", "workers", c.estimator.workers);
  c.estimator.exact_cap = get_size(doc, "estimator", "exact_cap", c.estimator.exact_cap);

  if (const auto* v = doc.find("report", "wer_edges")) {
    c.report.wer_edges = v->as_double_vector("report.wer_edges");
  }
  if (const auto* v = doc.find("report", "duration_bucket_s")) {
    c.report.duration_bucket_s = v->as_double("report.duration_bucket_s");
  }

  const auto* src = doc.find("oracle", "source");
  const std::string source = src ? src->as_string("oracle.source") : "toy";
  if (source == "toy") {
    (void)toy_utterances(doc, true);  // surfaces spec errors at parse time
    c.oracle = ToySource{doc};
  } else if (source == "bridge") {
    c.oracle = read_bridge_config(doc);
  } else {
    throw ConfigError("unknown oracle source '" + source + "' (expected toy or bridge)");
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(load_kv_file(path)); }

}  // namespace avshap
