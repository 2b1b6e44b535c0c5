#pragma once

// JSON / CSV serialization of reports, traces and run manifests.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mls/common.hpp"
#include "mls/data.hpp"
#include "mls/eval.hpp"
#include "mls/gates.hpp"
#include "mls/margins.hpp"
#include "mls/scores.hpp"

namespace mls {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Text form used in CSV cells: shortest round-trip, "inf" for the sentinel.
inline std::string score_text(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_real(v);
}

/// JSON has no infinity; the sentinel becomes null.
inline json real_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(real_json(v[i]));
  return a;
}

inline json params_json(const Params& p) {
  json o = json::object();
  for (const auto& [k, v] : p) o[k] = v;
  return o;
}

/// 64-bit FNV-1a over the file's bytes, as 16 hex digits.
inline std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> params;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> input_hashes;  // path -> fnv1a
  std::vector<std::string> outputs;
  json extra = json::object();
  std::string version = kToolVersion;
  std::string timestamp;
};

inline json to_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["params"] = m.params;
  j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  j["input_hashes"] = m.input_hashes;
  j["outputs"] = m.outputs;
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) j[it.key()] = it.value();
  j["version"] = m.version;
  j["timestamp"] = m.timestamp;
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("write to '" + path + "' failed");
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- score reports ----

inline std::string score_csv(const ScoreReport& rep) {
  const auto rank = ranks(rep);
  std::ostringstream os;
  os << "feature,score,rank\n";
  for (Index r = 0; r < rep.scores.size(); ++r)
    os << rep.feature_names[static_cast<size_t>(r)] << ',' << score_text(rep.scores[r]) << ','
       << rank[static_cast<size_t>(r)] << '\n';
  return os.str();
}

inline json to_json(const ScoreReport& rep) {
  json j;
  j["method"] = to_string(rep.method);
  j["params"] = params_json(rep.params);
  j["features"] = rep.feature_names;
  j["scores"] = vector_json(rep.scores);
  j["constant"] = rep.constant_feature;
  j["ranks"] = ranks(rep);
  return j;
}

inline std::string selection_csv(const ScoreReport& rep, const Selection& sel) {
  std::ostringstream os;
  os << "rank,feature,index,score\n";
  for (size_t pos = 0; pos < sel.indices.size(); ++pos) {
    const Index r = sel.indices[pos];
    os << pos + 1 << ',' << rep.feature_names[static_cast<size_t>(r)] << ',' << r << ','
       << score_text(rep.scores[r]) << '\n';
  }
  return os.str();
}

inline json to_json(const TrainTrace& t, const ScoreReport& rep) {
  json j;
  j["method"] = to_string(rep.method);
  j["features"] = rep.feature_names;
  j["mu"] = vector_json(t.mu);
  j["open_probabilities"] = vector_json(t.open_probabilities);
  j["loss_history"] = t.loss_history;
  j["no_margin_signal"] = t.no_margin_signal;
  return j;
}

// ---- margin model ----

/// Per-sample c_i, u_i and dataset-margin membership.
inline std::string margin_samples_csv(const MarginModel& m, const std::optional<std::vector<int>>& labels) {
  std::ostringstream os;
  os << "sample,count,u,in_dataset_margin" << (labels ? ",label" : "") << '\n';
  for (Index i = 0; i < m.n_samples(); ++i) {
    os << i << ',' << m.counts[i] << ',' << format_real(m.u[i]) << ','
       << (m.in_dataset_margin[static_cast<size_t>(i)] ? 1 : 0);
    if (labels) os << ',' << (*labels)[static_cast<size_t>(i)];
    os << '\n';
  }
  return os.str();
}

inline json margin_kinds_json(const MarginModel& m, const std::vector<std::string>& names) {
  json a = json::array();
  for (size_t r = 0; r < m.kinds.size(); ++r) {
    const auto& c = m.cutoffs[r];
    a.push_back({{"feature", names[r]},
                 {"kind", to_string(m.kinds[r])},
                 {"lower", c.lower ? json(*c.lower) : json(nullptr)},
                 {"upper", c.upper ? json(*c.upper) : json(nullptr)}});
  }
  return a;
}

// ---- evaluation ----

inline std::string ks_csv(const EvalReport& rep) {
  std::ostringstream os;
  os << "quantile,statistic,p_value,n_pos,n_neg,best\n";
  for (size_t i = 0; i < rep.ks.size(); ++i) {
    const auto& k = rep.ks[i];
    os << format_real(k.quantile) << ',' << format_real(k.statistic) << ',' << format_real(k.p_value) << ','
       << k.n_pos << ',' << k.n_neg << ',' << (rep.best_quantile && *rep.best_quantile == static_cast<Index>(i))
       << '\n';
  }
  return os.str();
}

inline const char* setup_name(Setup s) { return s == Setup::I ? "I" : s == Setup::II ? "II" : "III"; }

/// One row per (setup, rho, method, rep).
inline std::string bench_csv(const EvalReport& rep) {
  std::ostringstream os;
  os << "setup,rho,method,rep,seed,accuracy\n";
  for (const auto& c : rep.cells)
    for (size_t r = 0; r < c.accuracies.size(); ++r)
      os << setup_name(c.setup) << ',' << format_real(c.rho) << ',' << to_string(c.method) << ',' << r << ','
         << c.seeds[r] << ',' << format_real(c.accuracies[r]) << '\n';
  return os.str();
}

inline json to_json(const EvalReport& rep) {
  json j;
  j["method"] = rep.method;
  j["repetitions"] = rep.repetitions;
  if (rep.selection_accuracy) j["selection_accuracy"] = *rep.selection_accuracy;
  if (rep.auc) j["auc"] = *rep.auc;
  if (!rep.ks.empty()) {
    json a = json::array();
    for (const auto& k : rep.ks)
      a.push_back({{"quantile", k.quantile}, {"statistic", k.statistic}, {"p_value", k.p_value},
                   {"n_pos", k.n_pos}, {"n_neg", k.n_neg}});
    j["ks"] = a;
    if (rep.best_quantile) j["best_quantile"] = rep.ks[static_cast<size_t>(*rep.best_quantile)].quantile;
  }
  if (!rep.cells.empty()) {
    json a = json::array();
    for (const auto& c : rep.cells)
      a.push_back({{"setup", setup_name(c.setup)}, {"rho", c.rho}, {"method", to_string(c.method)},
                   {"mean", c.mean}, {"std", c.std}, {"accuracies", c.accuracies}});
    j["cells"] = a;
  }
  return j;
}

/// Table-1 style grid: one row per (setup, method), one "mean +- std" column per rho.
inline std::string bench_table(const EvalReport& rep, const std::vector<Setup>& setups,
                               const std::vector<double>& rhos, const std::vector<Method>& methods) {
  std::ostringstream os;
  char buf[64];
  os << "setup  method  ";
  for (double r : rhos) {
    std::snprintf(buf, sizeof(buf), "%16s", ("rho=" + format_real(r)).c_str());
    os << buf;
  }
  os << '\n';
  for (Setup s : setups)
    for (Method m : methods) {
      std::snprintf(buf, sizeof(buf), "%-6s %-8s", setup_name(s), to_string(m));
      os << buf;
      for (double r : rhos)
        for (const auto& c : rep.cells)
          if (c.setup == s && c.method == m && c.rho == r) {
            std::snprintf(buf, sizeof(buf), "%9.1f +- %4.1f", c.mean, c.std);
            os << buf;
          }
      os << '\n';
    }
  return os.str();
}

}  // namespace mls
