#include "avshap/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "avshap/error.hpp"
#include "avshap/keyvalue.hpp"
#include "json.hpp"

namespace avshap {

using nlohmann::json;

namespace {

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '[') s.remove_prefix(1);
  if (auto comma = s.find(','); comma != std::string_view::npos) s = s.substr(0, comma);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double d = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return d;
}

// Numbers before strings; numbers by value.
bool value_less(const std::string& a, const std::string& b) {
  const auto na = parse_number(a);
  const auto nb = parse_number(b);
  if (na && nb && *na != *nb) return *na < *nb;
  if (na.has_value() != nb.has_value()) return na.has_value();
  return a < b;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool index_less(const std::string& a, const std::string& b) {
  const auto pa = split(a, ',');
  const auto pb = split(b, ',');
  for (std::size_t i = 0; i < std::min(pa.size(), pb.size()); ++i) {
    if (pa[i] != pb[i]) return value_less(pa[i], pb[i]);
  }
  return pa.size() < pb.size();
}

json number(double d) {
  if (std::isfinite(d)) return d;
  return format_double(d);
}

json optional_number(bool defined, double d) { return defined ? number(d) : json(nullptr); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

// Long-format table: utterance_id, <tag columns>, metric, i, j, value.
class LongCsv {
 public:
  explicit LongCsv(std::vector<std::string> tag_keys) : tag_keys_(std::move(tag_keys)) {
    out_ << "utterance_id";
    for (const auto& k : tag_keys_) out_ << ',' << csv_field(k);
    out_ << ",metric,i,j,value\n";
  }

  void row(const UtteranceReport& u, const std::string& metric, const std::string& i,
           const std::string& j, const std::string& value) {
    out_ << csv_field(u.utterance_id);
    for (const auto& k : tag_keys_) {
      auto it = u.tags.find(k);
      out_ << ',' << (it == u.tags.end() ? "" : csv_field(it->second));
    }
    out_ << ',' << csv_field(metric) << ',' << i << ',' << j << ',' << value << '\n';
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  std::string str() const { return out_.str(); }

 private:
  std::vector<std::string> tag_keys_;
  std::ostringstream out_;
  std::size_t rows_ = 0;
};

std::string num_text(double d) { return format_double(d); }

void write_file(const std::filesystem::path& path, const std::string& content,
                std::vector<std::filesystem::path>& written) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write report file " + path.string());
  f << content;
  if (!f) throw ConfigError("failed writing report file " + path.string());
  written.push_back(path);
}

json utterance_json(const UtteranceReport& u) {
  json j;
  j["utterance_id"] = u.utterance_id;
  j["tags"] = u.tags;
  j["status"] = u.ok() ? "ok" : "error";
  if (!u.ok()) j["error"] = u.error;
  if (u.matrix) {
    const auto& m = *u.matrix;
    j["method"] = std::string(to_string(m.method()));
    j["evaluations"] = m.evaluations;
    j["baseline"] = m.baseline;
    j["full"] = m.full;
    json rows = json::array();
    for (std::size_t p = 0; p < m.n_players(); ++p) {
      rows.push_back(std::vector<double>(m.row(p).begin(), m.row(p).end()));
    }
    j["shapley"] = rows;
  }
  if (u.global) {
    j["global"] = {{"a_shap", optional_number(u.global->defined, u.global->a_shap)},
                   {"v_shap", optional_number(u.global->defined, u.global->v_shap)},
                   {"total_mass", u.global->total_mass},
                   {"defined", u.global->defined}};
  }
  if (u.generative) {
    const auto& g = *u.generative;
    json windows = json::array(), a = json::array(), v = json::array(), mass = json::array();
    for (std::size_t w = 0; w < g.size(); ++w) {
      windows.push_back({g.windows[w].begin, g.windows[w].end});
      a.push_back(optional_number(g.defined[w], g.a_shap[w]));
      v.push_back(optional_number(g.defined[w], g.v_shap(w)));
      mass.push_back(g.mass[w]);
    }
    j["generative"] = {{"windows", windows}, {"a_shap", a}, {"v_shap", v}, {"mass", mass}};
  }
  if (!u.alignment.empty()) {
    json list = json::array();
    for (const auto& al : u.alignment) {
      json fb = json::array(), tb = json::array();
      for (const auto& r : al.feature_bins) fb.push_back({r.begin, r.end});
      for (const auto& r : al.token_bins) tb.push_back({r.begin, r.end});
      json h = json::array();
      for (std::size_t k = 0; k < al.k(); ++k) {
        json row = json::array();
        for (double x : al.h[k]) row.push_back(al.row_defined[k] ? json(x) : json(nullptr));
        h.push_back(row);
      }
      list.push_back({{"modality", std::string(to_string(al.modality))},
                      {"feature_bins", fb},
                      {"token_bins", tb},
                      {"h", h},
                      {"row_defined", al.row_defined},
                      {"diagonal_score",
                       al.diagonal_score ? number(*al.diagonal_score) : json(nullptr)}});
    }
    j["alignment"] = list;
  }
  if (!u.ablation.empty()) {
    json list = json::array();
    for (const auto& ab : u.ablation) {
      list.push_back({{"modality", std::string(to_string(ab.modality))},
                      {"delta_logprob_per_token", ab.delta_logprob_per_token},
                      {"mean_delta", ab.mean_delta}});
    }
    j["ablation"] = list;
  }
  if (u.wer) j["wer"] = *u.wer;
  return j;
}

}  // namespace

std::size_t AnalysisReport::error_count() const {
  return static_cast<std::size_t>(
      std::count_if(utterances.begin(), utterances.end(), [](const auto& u) { return !u.ok(); }));
}

std::string bucket_label(double value, const std::vector<double>& upper_edges) {
  double lo = 0.0;
  for (double hi : upper_edges) {
    if (value < hi) return "[" + format_double(lo) + "," + format_double(hi) + ")";
    lo = hi;
  }
  return "[" + format_double(lo) + ",inf)";
}

std::string duration_bucket(double seconds, double width) {
  const double lo = std::floor(seconds / width) * width;
  return "[" + format_double(lo) + "," + format_double(lo + width) + ")";
}

std::vector<AggregateRow> aggregate(const std::vector<UtteranceReport>& utterances,
                                    const ReportOptions& options) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, std::vector<std::optional<double>>> cells;

  for (const auto& u : utterances) {
    if (!u.ok()) continue;
    std::vector<std::pair<std::string, std::string>> groups{{"all", "all"}};
    if (auto it = u.tags.find("snr_db"); it != u.tags.end()) groups.emplace_back("snr_db", it->second);
    if (auto it = u.tags.find("noise_type"); it != u.tags.end()) {
      groups.emplace_back("noise_type", it->second);
    }
    if (auto it = u.tags.find("duration_s"); it != u.tags.end()) {
      if (auto d = parse_number(it->second)) {
        groups.emplace_back("duration_bucket", duration_bucket(*d, options.duration_bucket_s));
      }
    }
    if (u.wer) groups.emplace_back("wer_bucket", bucket_label(*u.wer, options.wer_edges));

    std::vector<std::tuple<std::string, std::string, std::optional<double>>> values;
    if (u.global) {
      const bool d = u.global->defined;
      values.emplace_back("a_shap", "", d ? std::optional(u.global->a_shap) : std::nullopt);
      values.emplace_back("v_shap", "", d ? std::optional(u.global->v_shap) : std::nullopt);
    }
    if (u.generative) {
      for (std::size_t w = 0; w < u.generative->size(); ++w) {
        const bool d = u.generative->defined[w];
        values.emplace_back("gen_a_shap", std::to_string(w),
                            d ? std::optional(u.generative->a_shap[w]) : std::nullopt);
      }
    }
    for (const auto& al : u.alignment) {
      const std::string mod(to_string(al.modality));
      for (std::size_t k = 0; k < al.k(); ++k) {
        for (std::size_t w = 0; w < al.w(); ++w) {
          values.emplace_back("h_" + mod, std::to_string(k) + "," + std::to_string(w),
                              al.row_defined[k] ? std::optional(al.h[k][w]) : std::nullopt);
        }
      }
      if (al.k() == al.w() && al.k() >= 2) {
        values.emplace_back("diagonal_score_" + mod, "", al.diagonal_score);
      }
    }
    for (const auto& ab : u.ablation) {
      values.emplace_back("ablation_mean_delta", std::string(to_string(ab.modality)),
                          std::optional(ab.mean_delta));
    }
    if (u.wer) values.emplace_back("wer", "", u.wer);

    for (const auto& [gk, gv] : groups) {
      for (const auto& [metric, index, v] : values) cells[{gk, gv, metric, index}].push_back(v);
    }
  }

  std::vector<AggregateRow> rows;
  for (const auto& [key, vals] : cells) {
    const auto& [gk, gv, metric, index] = key;
    rows.push_back({gk, gv, metric, index, aggregate_defined(vals)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const AggregateRow& a, const AggregateRow& b) {
    if (a.group_key != b.group_key) {
      if (a.group_key == "all" || b.group_key == "all") return a.group_key == "all";
      return a.group_key < b.group_key;
    }
    if (a.group_value != b.group_value) return value_less(a.group_value, b.group_value);
    if (a.metric != b.metric) return a.metric < b.metric;
    return index_less(a.index, b.index);
  });
  return rows;
}

std::vector<std::filesystem::path> write_report(const AnalysisReport& report,
                                                const std::filesystem::path& dir,
                                                const ReportOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;

  if (options.json) {
    json j;
    j["mode"] = report.mode;
    j["estimator"] = {{"method", std::string(to_string(report.estimator.method))},
                      {"budget", report.estimator.budget_m},
                      {"seed", report.estimator.seed}};
    json utts = json::array();
    json errors = json::array();
    for (const auto& u : report.utterances) {
      utts.push_back(utterance_json(u));
      if (!u.ok()) errors.push_back({{"utterance_id", u.utterance_id}, {"message", u.error}});
    }
    j["utterances"] = utts;
    j["errors"] = errors;
    json aggs = json::array();
    for (const auto& a : report.aggregates) {
      aggs.push_back({{"group_key", a.group_key},
                      {"group_value", a.group_value},
                      {"metric", a.metric},
                      {"index", a.index},
                      {"mean", a.stat.count ? number(a.stat.mean) : json(nullptr)},
                      {"stddev", a.stat.count ? number(a.stat.stddev) : json(nullptr)},
                      {"count", a.stat.count},
                      {"undefined", a.stat.undefined}});
    }
    j["aggregates"] = aggs;
    write_file(dir / "report.json", j.dump(2) + "\n", written);
  }

  if (options.csv) {
    std::set<std::string> keys;
    for (const auto& u : report.utterances) {
      for (const auto& [k, v] : u.tags) keys.insert(k);
    }
    const std::vector<std::string> tag_keys(keys.begin(), keys.end());
    LongCsv shapley(tag_keys), global(tag_keys), generative(tag_keys), alignment(tag_keys),
        ablation(tag_keys);

    for (const auto& u : report.utterances) {
      if (!u.ok()) continue;
      if (u.matrix) {
        const auto& m = *u.matrix;
        for (std::size_t p = 0; p < m.n_players(); ++p) {
          for (std::size_t t = 0; t < m.t_len(); ++t) {
            shapley.row(u, "phi", std::to_string(p), std::to_string(t), num_text(m.at(p, t)));
          }
        }
        for (std::size_t t = 0; t < m.t_len(); ++t) {
          shapley.row(u, "baseline", std::to_string(t), "", num_text(m.baseline[t]));
          shapley.row(u, "full", std::to_string(t), "", num_text(m.full[t]));
        }
      }
      if (u.global) {
        const auto& g = *u.global;
        global.row(u, "a_shap", "", "", g.defined ? num_text(g.a_shap) : "");
        global.row(u, "v_shap", "", "", g.defined ? num_text(g.v_shap) : "");
        global.row(u, "total_mass", "", "", num_text(g.total_mass));
        global.row(u, "defined", "", "", g.defined ? "1" : "0");
        if (u.wer) global.row(u, "wer", "", "", num_text(*u.wer));
      }
      if (u.generative) {
        const auto& g = *u.generative;
        for (std::size_t w = 0; w < g.size(); ++w) {
          const std::string i = std::to_string(w);
          generative.row(u, "a_shap", i, "", g.defined[w] ? num_text(g.a_shap[w]) : "");
          generative.row(u, "v_shap", i, "", g.defined[w] ? num_text(g.v_shap(w)) : "");
          generative.row(u, "mass", i, "", num_text(g.mass[w]));
          generative.row(u, "token_begin", i, "", std::to_string(g.windows[w].begin));
          generative.row(u, "token_end", i, "", std::to_string(g.windows[w].end));
        }
      }
      for (const auto& al : u.alignment) {
        const std::string mod(to_string(al.modality));
        for (std::size_t k = 0; k < al.k(); ++k) {
          for (std::size_t w = 0; w < al.w(); ++w) {
            alignment.row(u, "h_" + mod, std::to_string(k), std::to_string(w),
                          al.row_defined[k] ? num_text(al.h[k][w]) : "");
          }
        }
        if (al.diagonal_score) {
          alignment.row(u, "diagonal_score_" + mod, "", "", num_text(*al.diagonal_score));
        }
      }
      for (const auto& ab : u.ablation) {
        const std::string mod(to_string(ab.modality));
        for (std::size_t t = 0; t < ab.delta_logprob_per_token.size(); ++t) {
          ablation.row(u, "delta_" + mod, std::to_string(t), "",
                       num_text(ab.delta_logprob_per_token[t]));
        }
        ablation.row(u, "mean_delta_" + mod, "", "", num_text(ab.mean_delta));
      }
    }
    if (shapley.rows()) write_file(dir / "shapley.csv", shapley.str(), written);
    if (global.rows()) write_file(dir / "global.csv", global.str(), written);
    if (generative.rows()) write_file(dir / "generative.csv", generative.str(), written);
    if (alignment.rows()) write_file(dir / "alignment.csv", alignment.str(), written);
    if (ablation.rows()) write_file(dir / "ablation.csv", ablation.str(), written);

    // Plain K x W grids for direct heatmap plotting.
    for (const auto& u : report.utterances) {
      if (!u.ok()) continue;
      for (const auto& al : u.alignment) {
        std::ostringstream grid;
        for (std::size_t k = 0; k < al.k(); ++k) {
          for (std::size_t w = 0; w < al.w(); ++w) {
            if (w) grid << ',';
            grid << (al.row_defined[k] ? num_text(al.h[k][w]) : "");
          }
          grid << '\n';
        }
        write_file(dir / ("heatmap_" + sanitize(u.utterance_id) + "_" +
                          std::string(to_string(al.modality)) + ".csv"),
                   grid.str(), written);
      }
    }

    std::ostringstream agg;
    agg << "group_key,group_value,metric,index,mean,stddev,count,undefined\n";
    for (const auto& a : report.aggregates) {
      agg << csv_field(a.group_key) << ',' << csv_field(a.group_value) << ',' << a.metric << ','
          << csv_field(a.index) << ',' << (a.stat.count ? num_text(a.stat.mean) : "") << ','
          << (a.stat.count ? num_text(a.stat.stddev) : "") << ',' << a.stat.count << ','
          << a.stat.undefined << '\n';
    }
    write_file(dir / "aggregates.csv", agg.str(), written);

    std::ostringstream err;
    err << "utterance_id,message\n";
    for (const auto& u : report.utterances) {
      if (!u.ok()) err << csv_field(u.utterance_id) << ',' << csv_field(u.error) << '\n';
    }
    write_file(dir / "errors.csv", err.str(), written);
  }
  std::sort(written.begin(), written.end());
  return written;
}

void print_summary(const AnalysisReport& report, std::ostream& out) {
  out << report.mode << ": " << report.utterances.size() << " utterance(s), "
      << report.error_count() << " error(s)\n";
  for (const auto& u : report.utterances) {
    out << "  " << u.utterance_id;
    if (!u.ok()) {
      out << "  ERROR " << u.error << '\n';
      continue;
    }
    if (u.global) {
      if (u.global->defined) {
        out << "  A-SHAP=" << num_text(u.global->a_shap) << " V-SHAP=" << num_text(u.global->v_shap);
      } else {
        out << "  A-SHAP=undefined";
      }
    }
    for (const auto& al : u.alignment) {
      if (al.diagonal_score) {
        out << "  diag_" << to_string(al.modality) << "=" << num_text(*al.diagonal_score);
      }
    }
    for (const auto& ab : u.ablation) {
      out << "  drop_" << to_string(ab.modality) << "=" << num_text(ab.mean_delta);
    }
    out << '\n';
  }
  for (const auto& a : report.aggregates) {
    if (a.group_key == "all" || a.metric != "a_shap") continue;
    out << "  [" << a.group_key << "=" << a.group_value << "] A-SHAP mean="
        << (a.stat.count ? num_text(a.stat.mean) : "undefined") << " n=" << a.stat.count
        << " undefined=" << a.stat.undefined << '\n';
  }
}

}  // namespace avshap
