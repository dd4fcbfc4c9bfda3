#pragma once

// Monte Carlo runner for the gamma-copula experiments: the reference law of
// T_n, bootstrap laws per simulated dataset, KS distance and coverage
// summaries, CSV/JSON emission and a flat key = value config format.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "maxboot/bootstrap.hpp"
#include "maxboot/datagen.hpp"
#include "maxboot/parallel.hpp"
#include "maxboot/rng.hpp"
#include "maxboot/stat_core.hpp"

namespace maxboot {

/// Configuration errors (bad keys, values out of range). The CLI maps these
/// to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Metric { KS, Coverage };
enum class CoverageMetric { TruthCdf, Indicator };
enum class OutputFormat { Csv, Json };

inline std::string to_string(Metric m) { return m == Metric::KS ? "KS" : "Coverage"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "KS") return Metric::KS;
  if (s == "Coverage") return Metric::Coverage;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

/// Set from a signal handler; runners stop claiming new outer reps and
/// return what has finished.
inline std::atomic<bool>& interrupt_requested() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline CopulaStructure experiment_structure(const std::string& experiment) {
  if (experiment == "I") return CopulaStructure::Equicorrelated;
  if (experiment == "II") return CopulaStructure::AR1;
  throw ConfigError("experiment must be I or II, got '" + experiment + "'");
}

/// "g,m,r,e,mix" (or full names) to plans. Mixed uses mixed_p0.
inline std::vector<BootstrapPlan> parse_schemes(const std::string& list, std::size_t b_reps, double mixed_p0 = 0.5) {
  std::vector<BootstrapPlan> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
    std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char c) { return std::tolower(c); });
    if (tok.empty()) continue;
    if (tok == "g" || tok == "gaussian") {
      out.push_back(BootstrapPlan::wild(MultiplierKind::gaussian(), b_reps));
    } else if (tok == "m" || tok == "mammen") {
      out.push_back(BootstrapPlan::wild(MultiplierKind::mammen(), b_reps));
    } else if (tok == "r" || tok == "rademacher") {
      out.push_back(BootstrapPlan::wild(MultiplierKind::rademacher(), b_reps));
    } else if (tok == "e" || tok == "empirical") {
      out.push_back(BootstrapPlan::empirical(b_reps));
    } else if (tok == "mix" || tok == "mixed") {
      if (!(mixed_p0 > 0.0 && mixed_p0 < 1.0)) throw ConfigError("mixed_p0 must lie in (0, 1)");
      out.push_back(BootstrapPlan::mixed_wild(mixed_p0, b_reps));
    } else {
      throw ConfigError("unknown scheme '" + tok + "' (expected g, m, r, e or mix)");
    }
  }
  if (out.empty()) throw ConfigError("scheme list is empty");
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (out[i].name() == out[j].name()) throw ConfigError("scheme '" + out[i].name() + "' listed twice");
  return out;
}

struct ExperimentConfig {
  std::string experiment = "II";
  CopulaSpec copula{CopulaStructure::AR1, 0.2, 1.0};
  std::size_t n = 200;
  std::size_t p = 400;
  std::vector<BootstrapPlan> schemes = parse_schemes("g,m,r,e", 500);
  double alpha_level = 0.05;
  std::size_t outer_reps = 500;
  std::size_t truth_reps = 5000;
  std::size_t b_reps = 500;
  MaxMode mode = MaxMode::OneSided;
  std::uint64_t master_seed = 20181;
  unsigned threads = 1;
  CoverageMetric coverage = CoverageMetric::TruthCdf;
  std::string output_path;  // empty: stdout
  OutputFormat format = OutputFormat::Csv;
  std::string figure_path;  // empty: no figure data
  bool sweep = false;
  bool quiet = false;

  void validate() const {
    if (experiment_structure(experiment) != copula.structure) {
      throw ConfigError("experiment " + experiment + " does not match the copula structure");
    }
    try {
      copula.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (n < 2) throw ConfigError("n must be >= 2");
    if (p < 1) throw ConfigError("p must be >= 1");
    if (outer_reps < 1 || truth_reps < 1 || b_reps < 1) throw ConfigError("outer, truth and breps must be >= 1");
    if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (schemes.empty()) throw ConfigError("no bootstrap schemes configured");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

struct ResultRow {
  std::string experiment;
  double rho = 0.0;
  double shape_alpha = 0.0;
  std::string scheme;
  Metric metric = Metric::KS;
  double mean = 0.0;
  double std = 0.0;
  std::size_t reps = 0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Per-setting output: aggregated rows plus the per-rep values behind them.
struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, std::vector<double>>> ks_per_rep;
  std::vector<std::pair<std::string, std::vector<double>>> coverage_per_rep;
  std::size_t completed_reps = 0;
  bool interrupted = false;
};

namespace detail {

inline constexpr std::uint64_t kTruthTag = 0x7472757468ULL;  // "truth"
inline constexpr std::uint64_t kDataTag = 0x64617461ULL;     // "data"
inline constexpr std::uint64_t kBootTag = 0x626f6f74ULL;     // "boot"

inline SeedSpec setting_seed(const ExperimentConfig& c) {
  return SeedSpec{c.master_seed, 0}.derive({static_cast<std::uint64_t>(c.copula.structure),
                                             std::bit_cast<std::uint64_t>(c.copula.rho),
                                             std::bit_cast<std::uint64_t>(c.copula.shape_alpha), c.n, c.p,
                                             static_cast<std::uint64_t>(c.mode)});
}

// Depends only on the scheme itself, so adding or dropping schemes leaves the
// draws of the others unchanged.
inline std::uint64_t scheme_tag(const BootstrapPlan& plan) {
  switch (plan.scheme) {
    case Scheme::Empirical: return 1;
    case Scheme::MixedWild: return 5 ^ splitmix64(std::bit_cast<std::uint64_t>(plan.multiplier.p0));
    case Scheme::Wild: return 2 + static_cast<std::uint64_t>(plan.multiplier.law);
  }
  return 0;
}

inline void log(const ExperimentConfig& c, const std::string& msg) {
  if (!c.quiet) std::cerr << "maxboot: " << msg << '\n';
}

inline std::string setting_label(const ExperimentConfig& c) {
  std::ostringstream os;
  os << c.experiment << " rho=" << c.copula.rho << " shape=" << c.copula.shape_alpha;
  return os.str();
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// Sorted T_n over truth_reps independent datasets, each centred at its
/// known mean.
inline EmpiricalDistribution run_truth(const ExperimentConfig& config) {
  config.validate();
  const SeedSpec base = detail::setting_seed(config).substream(detail::kTruthTag);
  std::vector<double> stats(config.truth_reps);
  parallel_for(config.truth_reps, config.threads, [&](std::size_t t) {
    if (interrupt_requested().load()) throw std::runtime_error("interrupted");
    const DataMatrix data = sample_gaussian_copula(config.copula, config.n, config.p, base.substream(t));
    stats[t] = max_statistic(data, *data.known_mean(), config.mode);
  });
  return EmpiricalDistribution(std::move(stats));
}

/// Per outer rep: one dataset, then per scheme a bootstrap law of b_reps
/// draws, its KS distance to the reference law and its coverage at the
/// (1 - alpha) bootstrap quantile t*. Coverage is P_ref{T_n <= t*} under
/// TruthCdf and 1{T_n(dataset) <= t*} under Indicator.
inline ExperimentOutput run_experiment(const ExperimentConfig& config, const EmpiricalDistribution& truth) {
  config.validate();
  const SeedSpec base = detail::setting_seed(config);
  const std::size_t reps = config.outer_reps;
  const std::size_t k = config.schemes.size();
  std::vector<BootstrapPlan> plans = config.schemes;
  for (auto& plan : plans) plan.b_reps = config.b_reps;

  std::vector<double> ks(reps * k), cov(reps * k);
  std::vector<std::uint8_t> done(reps, 0);
  std::atomic<std::size_t> finished{0};
  std::mutex log_mutex;
  const std::size_t step = std::max<std::size_t>(1, reps / 10);

  parallel_for(reps, config.threads, [&](std::size_t r) {
    if (interrupt_requested().load()) return;
    const DataMatrix data =
        sample_gaussian_copula(config.copula, config.n, config.p, base.derive({detail::kDataTag, r}));
    const double tn = max_statistic(data, *data.known_mean(), config.mode);
    for (std::size_t s = 0; s < k; ++s) {
      const auto boot = bootstrap_distribution(data, plans[s], config.mode,
                                               base.derive({detail::kBootTag, r, detail::scheme_tag(plans[s])}), 1);
      const double t_star = upper_quantile(boot, config.alpha_level);
      ks[r * k + s] = two_sample_ks(truth, boot);
      cov[r * k + s] = config.coverage == CoverageMetric::TruthCdf ? truth.cdf(t_star) : (tn <= t_star ? 1.0 : 0.0);
    }
    done[r] = 1;
    const std::size_t f = finished.fetch_add(1) + 1;
    if (f % step == 0 || f == reps) {
      std::lock_guard lock(log_mutex);
      detail::log(config, detail::setting_label(config) + ": " + std::to_string(f) + "/" + std::to_string(reps) +
                              " outer reps");
    }
  });

  ExperimentOutput out;
  out.completed_reps = static_cast<std::size_t>(std::count(done.begin(), done.end(), 1));
  out.interrupted = out.completed_reps < reps;
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<double> ks_s, cov_s;
    for (std::size_t r = 0; r < reps; ++r) {
      if (!done[r]) continue;
      ks_s.push_back(ks[r * k + s]);
      cov_s.push_back(cov[r * k + s]);
    }
    const std::string name = plans[s].name();
    for (Metric m : {Metric::KS, Metric::Coverage}) {
      const auto [mean, sd] = detail::mean_std(m == Metric::KS ? ks_s : cov_s);
      out.rows.push_back({config.experiment, config.copula.rho, config.copula.shape_alpha, name, m, mean, sd,
                          ks_s.size()});
    }
    out.ks_per_rep.emplace_back(name, std::move(ks_s));
    out.coverage_per_rep.emplace_back(name, std::move(cov_s));
  }
  return out;
}

inline ExperimentOutput run_experiment(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const EmpiricalDistribution truth = run_truth(config);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail::log(config, detail::setting_label(config) + ": reference law from " + std::to_string(config.truth_reps) +
                          " datasets in " + std::to_string(secs) + " s");
  return run_experiment(config, truth);
}

struct SweepSetting {
  std::string experiment;
  double rho;
  double shape_alpha;
};

/// The eight (experiment, rho, shape) cells in table order.
inline std::vector<SweepSetting> sweep_settings() {
  std::vector<SweepSetting> out;
  for (const char* e : {"I", "II"})
    for (double rho : {0.2, 0.8})
      for (double shape : {3.0, 1.0}) out.push_back({e, rho, shape});
  return out;
}

inline ExperimentConfig with_setting(ExperimentConfig c, const SweepSetting& s) {
  c.experiment = s.experiment;
  c.copula.structure = experiment_structure(s.experiment);
  c.copula.rho = s.rho;
  c.copula.shape_alpha = s.shape_alpha;
  return c;
}

/// Runs every sweep cell (or just the configured one) and concatenates rows.
inline std::vector<std::pair<ExperimentConfig, ExperimentOutput>> run_configured(const ExperimentConfig& config) {
  std::vector<std::pair<ExperimentConfig, ExperimentOutput>> out;
  if (!config.sweep) {
    out.emplace_back(config, run_experiment(config));
    return out;
  }
  for (const auto& s : sweep_settings()) {
    if (interrupt_requested().load()) break;
    const ExperimentConfig c = with_setting(config, s);
    out.emplace_back(c, run_experiment(c));
  }
  return out;
}

// ---- emission -------------------------------------------------------------

inline std::string format6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline double round6(double v) { return std::stod(format6(v)); }

inline constexpr const char* kResultHeader = "experiment,rho,shape_alpha,scheme,metric,mean,std,reps";

inline std::string results_to_csv(const std::vector<ResultRow>& rows) {
  std::string s = std::string(kResultHeader) + "\n";
  for (const auto& r : rows) {
    s += r.experiment + "," + format6(r.rho) + "," + format6(r.shape_alpha) + "," + r.scheme + "," +
         to_string(r.metric) + "," + format6(r.mean) + "," + format6(r.std) + "," + std::to_string(r.reps) + "\n";
  }
  return s;
}

inline std::string results_to_json(const std::vector<ResultRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"experiment", r.experiment},
                   {"rho", round6(r.rho)},
                   {"shape_alpha", round6(r.shape_alpha)},
                   {"scheme", r.scheme},
                   {"metric", to_string(r.metric)},
                   {"mean", round6(r.mean)},
                   {"std", round6(r.std)},
                   {"reps", r.reps}});
  }
  return arr.dump(2) + "\n";
}

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

/// Rows in the order given; empty path or "-" writes to stdout.
inline void emit_results(const std::vector<ResultRow>& rows, OutputFormat format, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("emit_results: no rows");
  write_text(path, format == OutputFormat::Csv ? results_to_csv(rows) : results_to_json(rows));
}

inline std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultHeader) throw std::invalid_argument("results csv: bad header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw std::invalid_argument("results csv: expected 8 fields in '" + line + "'");
    rows.push_back({f[0], std::stod(f[1]), std::stod(f[2]), f[3], parse_metric(f[4]), std::stod(f[5]),
                    std::stod(f[6]), static_cast<std::size_t>(std::stoull(f[7]))});
  }
  return rows;
}

inline std::vector<ResultRow> parse_results_json(const std::string& text) {
  std::vector<ResultRow> rows;
  for (const auto& o : nlohmann::json::parse(text)) {
    rows.push_back({o.at("experiment").get<std::string>(), o.at("rho").get<double>(),
                    o.at("shape_alpha").get<double>(), o.at("scheme").get<std::string>(),
                    parse_metric(o.at("metric").get<std::string>()), o.at("mean").get<double>(),
                    o.at("std").get<double>(), o.at("reps").get<std::size_t>()});
  }
  return rows;
}

/// Long format `scheme,rep,value`, one row per (scheme, rep); values are
/// written with 17 significant digits so they reload exactly.
inline void emit_figure_data(const std::vector<std::pair<std::string, std::vector<double>>>& per_rep,
                             const std::string& path) {
  if (per_rep.empty()) throw std::invalid_argument("emit_figure_data: no schemes");
  std::string s = "scheme,rep,value\n";
  char buf[40];
  for (const auto& [scheme, values] : per_rep) {
    for (std::size_t r = 0; r < values.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", values[r]);
      s += scheme + "," + std::to_string(r) + "," + buf + "\n";
    }
  }
  write_text(path, s);
}

/// `<stem>_<experiment>_rho<r>_shape<a><ext>` for sweep runs.
inline std::string figure_path_for(const std::string& path, const ExperimentConfig& c) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? path.substr(0, dot) : path;
  const std::string ext = has_ext ? path.substr(dot) : ".csv";
  return stem + "_" + c.experiment + "_rho" + format6(c.copula.rho) + "_shape" + format6(c.copula.shape_alpha) + ext;
}

// ---- config ---------------------------------------------------------------

using Settings = std::map<std::string, std::string>;

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys{"preset", "experiment", "rho",   "shape",   "n",           "p",
                                             "schemes", "mixed_p0",  "alpha", "outer",   "truth",       "breps",
                                             "seed",   "mode",       "threads", "coverage", "output",     "format",
                                             "figure_data", "sweep"};
  return keys;
}

/// Flat `key = value` lines; `#` starts a comment; blank lines ignored.
inline Settings parse_config_text(const std::string& text, const std::string& origin = "config") {
  Settings out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& keys = known_config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

inline Settings parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path);
}

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(value, &used));
    } else {
      if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
      v = static_cast<T>(std::stoull(value, &used));
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad value for " + key + ": '" + v + "'");
}

}  // namespace detail

/// Builds a config from merged settings (callers merge CLI over file). A
/// preset only changes defaults; explicit keys always win.
inline ExperimentConfig config_from_settings(const Settings& s) {
  ExperimentConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = s.find(key);
    return it == s.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("preset")) {
    if (*v == "desk") {
      c.outer_reps = 100;
      c.truth_reps = 2000;
      c.b_reps = 200;
      c.p = 100;
    } else if (*v == "paper") {
      c.outer_reps = 500;
      c.truth_reps = 5000;
      c.b_reps = 500;
      c.p = 400;
    } else {
      throw ConfigError("preset must be desk or paper, got '" + *v + "'");
    }
  }
  if (const auto* v = get("experiment")) {
    c.experiment = *v;
    c.copula.structure = experiment_structure(*v);
  }
  if (const auto* v = get("rho")) c.copula.rho = detail::parse_number<double>("rho", *v);
  if (const auto* v = get("shape")) c.copula.shape_alpha = detail::parse_number<double>("shape", *v);
  if (const auto* v = get("n")) c.n = detail::parse_number<std::size_t>("n", *v);
  if (const auto* v = get("p")) c.p = detail::parse_number<std::size_t>("p", *v);
  if (const auto* v = get("alpha")) c.alpha_level = detail::parse_number<double>("alpha", *v);
  if (const auto* v = get("outer")) c.outer_reps = detail::parse_number<std::size_t>("outer", *v);
  if (const auto* v = get("truth")) c.truth_reps = detail::parse_number<std::size_t>("truth", *v);
  if (const auto* v = get("breps")) c.b_reps = detail::parse_number<std::size_t>("breps", *v);
  if (const auto* v = get("seed")) c.master_seed = detail::parse_number<std::uint64_t>("seed", *v);
  if (const auto* v = get("threads")) c.threads = detail::parse_number<unsigned>("threads", *v);
  if (const auto* v = get("mode")) {
    if (*v == "onesided") c.mode = MaxMode::OneSided;
    else if (*v == "abs") c.mode = MaxMode::Absolute;
    else throw ConfigError("mode must be onesided or abs, got '" + *v + "'");
  }
  if (const auto* v = get("coverage")) {
    if (*v == "truth_cdf") c.coverage = CoverageMetric::TruthCdf;
    else if (*v == "indicator") c.coverage = CoverageMetric::Indicator;
    else throw ConfigError("coverage must be truth_cdf or indicator, got '" + *v + "'");
  }
  if (const auto* v = get("format")) {
    if (*v == "csv") c.format = OutputFormat::Csv;
    else if (*v == "json") c.format = OutputFormat::Json;
    else throw ConfigError("format must be csv or json, got '" + *v + "'");
  }
  if (const auto* v = get("output")) c.output_path = *v;
  if (const auto* v = get("figure_data")) c.figure_path = *v;
  if (const auto* v = get("sweep")) c.sweep = detail::parse_bool("sweep", *v);
  const double p0 = get("mixed_p0") ? detail::parse_number<double>("mixed_p0", *get("mixed_p0")) : 0.5;
  c.schemes = parse_schemes(get("schemes") ? *get("schemes") : "g,m,r,e", c.b_reps, p0);
  c.validate();
  return c;
}

}  // namespace maxboot
