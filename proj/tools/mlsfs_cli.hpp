#pragma once

// mlsfs command-line driver. Kept in a header so tests can run commands in-process.
// Exit codes: 0 success, 1 data / numeric error, 2 usage error.

#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mls/mls.hpp"

namespace mls::cli {

inline constexpr int kOk = 0;
inline constexpr int kDataError = 1;
inline constexpr int kUsageError = 2;

/// Usage problems discovered after parsing (e.g. a label column with one class).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ScoreOpts {
  std::string input;
  std::string method = "mls";
  std::string label_col;
  double quantile = 0.05;
  int k = 1;
  double skew_right = 0.5;
  double skew_left = -0.5;
  bool no_standardize = false;
  std::string kernel = "heat";
  int neighbors = 5;
  std::string output;
};

struct GateOpts {
  int epochs = 500;
  double lr = 0.1;
  double sigma = 0.5;
  std::uint64_t seed = 0;
  bool sign_flip = false;
  std::string optimizer = "adam";
};

struct SelectOpts {
  ScoreOpts score;
  GateOpts gate;
  Index num_features = 0;
};

struct SynthOpts {
  int setup = 1;
  double rho = 0.9;
  Index n = 1000;
  std::uint64_t seed = 0;
  bool noisy = false;
  std::string output;
};

struct ValidateOpts {
  std::string input;
  std::string label_col;
  std::vector<double> quantiles;
  int k = 1;
  double skew_right = 0.5;
  double skew_left = -0.5;
  bool no_standardize = false;
  std::string output;
  std::string weights_output;
};

struct BenchOpts {
  int reps = 100;
  std::uint64_t seed = 0;
  std::string methods = "mls,ls";
  std::string setups = "1,2,3";
  std::string rhos = "0.9,0.95,0.97";
  Index n = 1000;
  double quantile = 0.05;
  GateOpts gate;
  unsigned threads = 1;
  std::string output;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = mls::detail::trim(item);
    if (t.empty()) throw ConfigError("empty entry in list '" + s + "'");
    out.emplace_back(t);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

inline Method parse_method(const std::string& s) {
  if (s == "ls") return Method::LS;
  if (s == "mls") return Method::MLS;
  if (s == "dufs") return Method::DUFS;
  if (s == "dufs-mls") return Method::DUFS_MLS;
  throw ConfigError("unknown method '" + s + "'");
}

inline KernelConfig kernel_config(const ScoreOpts& o) {
  KernelConfig kc;
  if (o.kernel == "heat") kc.mode = KernelMode::Heat;
  else if (o.kernel == "knn") kc.mode = KernelMode::BinaryKnn;
  else if (o.kernel == "printed") kc.mode = KernelMode::Printed;
  else throw ConfigError("unknown kernel '" + o.kernel + "'");
  kc.neighbors = o.neighbors;
  return kc;
}

inline MarginConfig margin_config(double q, int k, double sr, double sl) {
  MarginConfig cfg;
  cfg.quantile = q;
  cfg.k = k;
  cfg.skew_right = sr;
  cfg.skew_left = sl;
  cfg.validate();
  return cfg;
}

inline TrainConfig train_config(const GateOpts& g) {
  TrainConfig tc;
  tc.epochs = g.epochs;
  tc.learning_rate = g.lr;
  tc.seed = g.seed;
  if (g.optimizer == "adam") tc.optimizer = Optimizer::Adam;
  else if (g.optimizer == "gd") tc.optimizer = Optimizer::GradientDescent;
  else throw ConfigError("unknown optimizer '" + g.optimizer + "'");
  tc.validate();
  return tc;
}

inline GateState gate_template(const GateOpts& g) {
  GateState st;
  st.sigma = g.sigma;
  st.sign_flip = g.sign_flip;
  require(g.sigma > 0.0, "sigma must be positive");
  return st;
}

/// Every option of a subcommand with its given or default value.
inline std::map<std::string, std::string> echo_params(const CLI::App& sub) {
  std::map<std::string, std::string> p;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      std::string v;
      for (const auto& r : opt->reduced_results()) v += (v.empty() ? "" : ",") + r;
      p[name] = opt->get_type_size() == 0 ? "true" : v;
    } else {
      p[name] = opt->get_type_size() == 0 ? "false" : opt->get_default_str();
    }
  }
  return p;
}

inline RunManifest manifest_for(const std::string& command, std::map<std::string, std::string> params,
                                std::optional<std::uint64_t> seed, std::map<std::string, std::string> hashes) {
  RunManifest m;
  m.command = command;
  m.params = std::move(params);
  m.seed = seed;
  m.input_hashes = std::move(hashes);
  return m;
}

struct Outputs {
  std::string base;
  std::vector<std::string> files;

  std::string manifest_path() const { return base + ".manifest.json"; }
  void text(const std::string& path, const std::string& body) {
    write_text(path, body);
    files.push_back(path);
  }
  void doc(const std::string& path, json j) {
    j["manifest"] = manifest_path();
    write_json(path, j);
    files.push_back(path);
  }
  void manifest(RunManifest m) {
    m.outputs = files;
    m.timestamp = utc_timestamp();
    write_json(manifest_path(), to_json(m));
  }
};

inline Dataset load_prepared(const std::string& input, const std::string& label_col, bool no_standardize) {
  std::optional<std::string> lc;
  if (!label_col.empty()) lc = label_col;
  Dataset raw = load_csv(input, lc);
  return no_standardize ? raw : standardize(raw).first;
}

inline ScoreReport score_dataset(const Dataset& ds, const ScoreOpts& o, Method method, const GateOpts* gate,
                                 std::optional<TrainTrace>* trace, std::optional<MarginModel>* model_out) {
  const MarginConfig mc = margin_config(o.quantile, o.k, o.skew_right, o.skew_left);
  if (method == Method::LS) return laplacian_score(ds, kernel_config(o));
  if (method == Method::MLS) {
    *model_out = build_margin_model(ds, mc);
    return mls(ds, **model_out);
  }
  TrainConfig tc = train_config(*gate);
  tc.loss_variant = method == Method::DUFS ? LossVariant::Dufs : LossVariant::DufsMls;
  GateState st = gate_template(*gate);
  st.mu = Vector::Zero(ds.n_features());
  if (tc.loss_variant == LossVariant::DufsMls) *model_out = build_margin_model(ds, mc);
  *trace = train(ds, tc, st, *model_out ? &**model_out : nullptr);
  ScoreReport rep = gate_report(ds, **trace, tc.loss_variant);
  rep.params = {{"epochs", std::to_string(tc.epochs)}, {"learning_rate", format_real(tc.learning_rate)},
                {"optimizer", to_string(tc.optimizer)}, {"sigma", format_real(st.sigma)},
                {"sign_flip", st.sign_flip ? "true" : "false"}};
  return rep;
}

inline json report_doc(const ScoreReport& rep, const Dataset& ds, const std::optional<MarginModel>& model) {
  json j = to_json(rep);
  if (model) {
    j["margins"] = margin_kinds_json(*model, ds.feature_names());
    j["marginal_samples"] = model->n_marginal();
    if (model->n_marginal() == 0) j["warning"] = "no sample lies in any margin";
  }
  return j;
}

// ---- commands ----

inline int cmd_score(const CLI::App& sub, const ScoreOpts& o, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(o.method);
  if (method != Method::LS && method != Method::MLS) throw ConfigError("score supports --method ls|mls");
  const Dataset ds = load_prepared(o.input, o.label_col, o.no_standardize);
  std::optional<TrainTrace> trace;
  std::optional<MarginModel> model;
  const ScoreReport rep = score_dataset(ds, o, method, nullptr, &trace, &model);
  if (model && model->n_marginal() == 0) err << "warning: no sample lies in any margin\n";
  if (o.output.empty()) {
    out << score_csv(rep);
    return kOk;
  }
  Outputs w{o.output, {}};
  w.text(o.output, score_csv(rep));
  w.doc(o.output + ".json", report_doc(rep, ds, model));
  w.manifest(manifest_for("score", echo_params(sub), std::nullopt, {{o.input, fnv1a_file(o.input)}}));
  return kOk;
}

inline int cmd_select(const CLI::App& sub, const SelectOpts& o, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(o.score.method);
  require(o.num_features >= 1, "number of features must be >= 1");
  train_config(o.gate);  // validate before loading
  const Dataset ds = load_prepared(o.score.input, o.score.label_col, o.score.no_standardize);
  std::optional<TrainTrace> trace;
  std::optional<MarginModel> model;
  const ScoreReport rep = score_dataset(ds, o.score, method, &o.gate, &trace, &model);
  const Selection sel = select_top(rep, o.num_features);
  if (sel.degenerate) err << "warning: every selected feature is constant\n";
  if (model && model->n_marginal() == 0) err << "warning: no sample lies in any margin\n";
  if (o.score.output.empty()) {
    out << selection_csv(rep, sel);
    return kOk;
  }
  Outputs w{o.score.output, {}};
  w.text(o.score.output, selection_csv(rep, sel));
  json j = report_doc(rep, ds, model);
  j["selected"] = sel.indices;
  j["degenerate"] = sel.degenerate;
  w.doc(o.score.output + ".json", j);
  if (trace) w.doc(o.score.output + ".trace.json", to_json(*trace, rep));
  const bool seeded = method == Method::DUFS || method == Method::DUFS_MLS;
  w.manifest(manifest_for("select", echo_params(sub), seeded ? std::optional<std::uint64_t>(o.gate.seed) : std::nullopt,
              {{o.score.input, fnv1a_file(o.score.input)}}));
  return kOk;
}

inline int cmd_synth(const CLI::App& sub, const SynthOpts& o, std::ostream& out) {
  require(o.setup >= 1 && o.setup <= 3, "setup must be 1, 2 or 3");
  SynthSpec spec;
  spec.setup = static_cast<Setup>(o.setup);
  spec.rho = o.rho;
  spec.n_samples = o.n;
  spec.seed = o.seed;
  spec.validate();
  const SynthDataset data = gen_setup(spec);
  Dataset ds = data.dataset;
  if (o.noisy) {
    Rng rng = make_rng(o.seed, 1);
    ds = add_noise_features(ds, rng);
  }
  Outputs w{o.output, {}};
  write_csv(ds, o.output);
  w.files.push_back(o.output);
  RunManifest m = manifest_for("synth", echo_params(sub), o.seed, {});
  json truth = json::array();
  for (Index r : data.marginal_features) truth.push_back(ds.feature_names()[static_cast<size_t>(r)]);
  m.extra["ground_truth"] = truth;
  m.extra["ground_truth_indices"] = data.marginal_features;
  m.extra["n_features"] = ds.n_features();
  m.extra["n_positive"] = std::count(ds.labels()->begin(), ds.labels()->end(), 1);
  w.manifest(m);
  out << "wrote " << o.output << " (" << ds.n_samples() << " x " << ds.n_features() << ")\n";
  return kOk;
}

inline int cmd_validate_margin(const CLI::App& sub, const ValidateOpts& o, std::ostream& out) {
  std::vector<double> qs = o.quantiles;
  if (qs.empty())
    for (int i = 1; i <= 30; ++i) qs.push_back(i / 100.0);
  const MarginConfig base = margin_config(0.05, o.k, o.skew_right, o.skew_left);
  for (double q : qs) require(q > 0.0 && q < 0.5, "quantile must be in (0, 0.5)");
  const Dataset ds = load_prepared(o.input, o.label_col, o.no_standardize);
  const auto& y = *ds.labels();
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size()))
    throw UsageError("label column '" + o.label_col + "' has a single class");

  const EvalReport rep = margin_weight_separation(ds, base, qs);
  char buf[128];
  out << "quantile  statistic   p_value\n";
  for (size_t i = 0; i < rep.ks.size(); ++i) {
    const auto& k = rep.ks[i];
    std::snprintf(buf, sizeof(buf), "%8.4f  %9.4f  %9.3e%s\n", k.quantile, k.statistic, k.p_value,
                  static_cast<Index>(i) == *rep.best_quantile ? "  <- max D" : "");
    out << buf;
  }
  if (o.output.empty()) return kOk;
  Outputs w{o.output, {}};
  w.text(o.output, ks_csv(rep));
  w.doc(o.output + ".json", to_json(rep));
  if (!o.weights_output.empty()) {
    MarginConfig cfg = base;
    cfg.quantile = rep.ks[static_cast<size_t>(*rep.best_quantile)].quantile;
    w.text(o.weights_output, margin_samples_csv(build_margin_model(ds, cfg), ds.labels()));
  }
  w.manifest(manifest_for("validate-margin", echo_params(sub), std::nullopt, {{o.input, fnv1a_file(o.input)}}));
  return kOk;
}

inline int cmd_bench(const CLI::App& sub, const BenchOpts& o, std::ostream& out) {
  BenchConfig cfg;
  cfg.reps = o.reps;
  cfg.seed = o.seed;
  cfg.n_samples = o.n;
  cfg.threads = o.threads;
  cfg.methods.clear();
  for (const auto& m : split_list(o.methods)) cfg.methods.push_back(parse_method(m));
  cfg.setups.clear();
  for (const auto& s : split_list(o.setups)) {
    if (s != "1" && s != "2" && s != "3") throw ConfigError("setup must be 1, 2 or 3, got '" + s + "'");
    cfg.setups.push_back(static_cast<Setup>(s[0] - '0'));
  }
  cfg.rhos.clear();
  for (const auto& r : split_list(o.rhos)) {
    const auto v = mls::detail::parse_real(r);
    if (!v) throw ConfigError("invalid rho '" + r + "'");
    cfg.rhos.push_back(*v);
  }
  require(o.n >= 20, "n must be >= 20");
  cfg.margin.quantile = o.quantile;
  cfg.train = train_config(o.gate);
  cfg.gates = gate_template(o.gate);
  cfg.validate();

  const EvalReport rep = run_table1_benchmark(cfg);
  out << "recovery accuracy x100 over " << cfg.reps << " repetitions\n"
      << bench_table(rep, cfg.setups, cfg.rhos, cfg.methods);
  if (o.output.empty()) return kOk;
  Outputs w{o.output, {}};
  w.text(o.output, bench_csv(rep));
  w.doc(o.output + ".json", to_json(rep));
  w.manifest(manifest_for("bench", echo_params(sub), o.seed, {}));
  return kOk;
}

inline void add_margin_flags(CLI::App* sub, double* q, int* k, double* sr, double* sl, bool* no_std) {
  if (q) sub->add_option("--quantile", *q, "margin quantile q in (0, 0.5)");
  sub->add_option("--k", *k, "minimum margin count for the dataset margin");
  sub->add_option("--skew-right", *sr, "skewness at or above which a feature uses its right margin");
  sub->add_option("--skew-left", *sl, "skewness at or below which a feature uses its left margin");
  sub->add_flag("--no-standardize", *no_std, "score the raw values instead of z-scores");
}

inline void add_gate_flags(CLI::App* sub, GateOpts& g, bool with_seed) {
  sub->add_option("--epochs", g.epochs, "gate training epochs");
  sub->add_option("--lr", g.lr, "learning rate");
  sub->add_option("--sigma", g.sigma, "gate noise standard deviation");
  sub->add_option("--optimizer", g.optimizer, "adam or gd");
  sub->add_flag("--sign-flip", g.sign_flip, "minimize +numerator/denominator instead of its negation");
  if (with_seed) sub->add_option("--seed", g.seed, "training seed");
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Marginal Laplacian Score feature selection", "mlsfs"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  ScoreOpts score;
  auto* s_score = app.add_subcommand("score", "score every feature with LS or MLS");
  s_score->add_option("--input", score.input, "input CSV")->required()->check(CLI::ExistingFile);
  s_score->add_option("--method", score.method, "ls or mls");
  s_score->add_option("--label-col", score.label_col, "label column to exclude from the features");
  detail::add_margin_flags(s_score, &score.quantile, &score.k, &score.skew_right, &score.skew_left,
                           &score.no_standardize);
  s_score->add_option("--kernel", score.kernel, "LS affinity: heat, knn or printed");
  s_score->add_option("--neighbors", score.neighbors, "neighbour count for --kernel knn");
  s_score->add_option("--output", score.output, "scores CSV (stdout when omitted)");

  SelectOpts select;
  auto* s_select = app.add_subcommand("select", "select the top features");
  s_select->add_option("--input", select.score.input, "input CSV")->required()->check(CLI::ExistingFile);
  s_select->add_option("--method", select.score.method, "ls, mls, dufs or dufs-mls");
  s_select->add_option("--num-features", select.num_features, "number of features to keep")->required();
  s_select->add_option("--label-col", select.score.label_col, "label column to exclude from the features");
  detail::add_margin_flags(s_select, &select.score.quantile, &select.score.k, &select.score.skew_right,
                           &select.score.skew_left, &select.score.no_standardize);
  s_select->add_option("--kernel", select.score.kernel, "LS affinity: heat, knn or printed");
  s_select->add_option("--neighbors", select.score.neighbors, "neighbour count for --kernel knn");
  detail::add_gate_flags(s_select, select.gate, true);
  s_select->add_option("--output", select.score.output, "selection CSV (stdout when omitted)");

  SynthOpts synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
  s_synth->add_option("--setup", synth.setup, "1, 2 or 3");
  s_synth->add_option("--rho", synth.rho, "majority fraction in (0, 1)");
  s_synth->add_option("--n", synth.n, "samples");
  s_synth->add_option("--seed", synth.seed, "generator seed");
  s_synth->add_flag("--noisy", synth.noisy, "append correlated and independent noise up to 309 features");
  s_synth->add_option("--output", synth.output, "output CSV")->required();

  ValidateOpts val;
  auto* s_val = app.add_subcommand("validate-margin", "KS test of margin weights between classes");
  s_val->add_option("--input", val.input, "input CSV")->required()->check(CLI::ExistingFile);
  s_val->add_option("--label-col", val.label_col, "binary label column")->required();
  s_val->add_option("--quantiles", val.quantiles, "comma-separated quantiles (default 0.01..0.30)")
      ->delimiter(',');
  detail::add_margin_flags(s_val, nullptr, &val.k, &val.skew_right, &val.skew_left, &val.no_standardize);
  s_val->add_option("--output", val.output, "per-quantile CSV");
  s_val->add_option("--weights-output", val.weights_output, "per-sample c, u CSV at the max-D quantile");

  BenchOpts bench;
  auto* s_bench = app.add_subcommand("bench", "synthetic recovery benchmark");
  s_bench->add_option("--reps", bench.reps, "repetitions per cell");
  s_bench->add_option("--seed", bench.seed, "master seed");
  s_bench->add_option("--methods", bench.methods, "comma-separated: ls, mls, dufs, dufs-mls");
  s_bench->add_option("--setups", bench.setups, "comma-separated setups");
  s_bench->add_option("--rhos", bench.rhos, "comma-separated majority fractions");
  s_bench->add_option("--n", bench.n, "samples per dataset");
  s_bench->add_option("--quantile", bench.quantile, "margin quantile");
  detail::add_gate_flags(s_bench, bench.gate, false);
  s_bench->add_option("--threads", bench.threads, "worker threads (results do not depend on it)");
  s_bench->add_option("--output", bench.output, "per-repetition CSV");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*s_score) return detail::cmd_score(*s_score, score, out, err);
    if (*s_select) return detail::cmd_select(*s_select, select, out, err);
    if (*s_synth) return detail::cmd_synth(*s_synth, synth, out);
    if (*s_val) return detail::cmd_validate_margin(*s_val, val, out);
    if (*s_bench) return detail::cmd_bench(*s_bench, bench, out);
  } catch (const std::invalid_argument& e) {  // ConfigError, UsageError
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace mls::cli
