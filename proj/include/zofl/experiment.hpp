#pragma once

// Config-driven commands behind the zofl executable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim.hpp"
#include "planner.hpp"
#include "problems.hpp"
#include "types.hpp"
#include "validate.hpp"

namespace zofl {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int runtime = 3;
inline constexpr int validation = 4;
}  // namespace exit_code

struct Budget {
  std::uint64_t T = 0;
  std::uint64_t B = 1;
  std::vector<std::uint64_t> K;
};

struct ExperimentConfig {
  json problem;  // problem description (see problem_from_json / game_from_json)
  NoiseModel noise;
  Algorithm algorithm = Algorithm::MbASGD;
  std::vector<Scheme> schemes{Scheme::L2};
  Feedback feedback = Feedback::TwoPoint;
  int p = 1;
  std::optional<FedTopology> topology;
  std::optional<Budget> budget;
  json constants = json::object();  // overrides: d, M, M2, G, R, eps
  StepRule step_rule = StepRule::AcSa;
  double step_scale = 1.0;
  ProxKind prox = ProxKind::Euclidean;
  bool exact_operator = false;
  std::optional<std::vector<double>> start;
  std::uint64_t repeat = 1;
  std::uint64_t seed = 0;
  std::string output = "out";
  bool timing = false;
  json source;  // effective config, used for the hash
};

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw config_error(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw config_error("unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
T get_as(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(where + "." + key + ": " + e.what());
  }
}

inline std::uint64_t positive_count(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0)
    throw config_error(where + "." + key + " must be a positive integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

// The output directory does not change results, so it is left out.
inline std::string config_hash(const json& j) {
  json k = j;
  if (k.is_object()) k.erase("output");
  const std::string s = k.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline ExperimentConfig parse_config(const json& j) {
  using detail::only_keys;
  only_keys(j, {"problem", "algorithm", "scheme", "feedback", "p", "topology", "budget", "constants", "step_rule",
                "step_scale", "prox", "exact_operator", "start", "repeat", "seed", "output", "timing"},
            "config");
  ExperimentConfig c;
  try {
    if (j.contains("problem")) {
      const json& pj = j.at("problem");
      only_keys(pj, {"kind", "d", "seed", "b", "radius", "noise_scale", "c", "matrix", "noise"}, "problem");
      if (!pj.contains("kind")) throw config_error("problem.kind is required");
      c.problem = pj;
      c.problem.erase("noise");
      if (pj.contains("noise")) c.noise = noise_from_json(pj.at("noise"));
    }

    if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    if (j.contains("scheme")) {
      c.schemes.clear();
      const json& s = j.at("scheme");
      if (s.is_array()) {
        for (const auto& v : s) c.schemes.push_back(parse_scheme(v.get<std::string>()));
      } else {
        c.schemes.push_back(parse_scheme(s.get<std::string>()));
      }
      if (c.schemes.empty()) throw config_error("config.scheme must not be empty");
    }
    if (j.contains("feedback")) c.feedback = parse_feedback(j.at("feedback").get<std::string>());
    if (j.contains("p")) {
      c.p = j.at("p").get<int>();
      if (c.p != 1 && c.p != 2) throw config_error("config.p must be 1 or 2");
    }
    if (j.contains("topology") && j.contains("budget"))
      throw config_error("config must give either topology or budget, not both");
    if (j.contains("topology")) {
      const json& t = j.at("topology");
      only_keys(t, {"B", "K", "N"}, "topology");
      c.topology = FedTopology{detail::positive_count(t, "B", "topology"), detail::positive_count(t, "K", "topology"),
                               detail::positive_count(t, "N", "topology")};
    }
    if (j.contains("budget")) {
      const json& b = j.at("budget");
      only_keys(b, {"T", "B", "K"}, "budget");
      Budget bu;
      bu.T = detail::positive_count(b, "T", "budget");
      bu.B = b.contains("B") ? detail::positive_count(b, "B", "budget") : 1;
      for (const auto& k : b.at("K")) {
        if (!k.is_number_integer() || k.get<long long>() <= 0) throw config_error("budget.K entries must be positive");
        bu.K.push_back(k.get<std::uint64_t>());
      }
      if (bu.K.empty()) throw config_error("budget.K must not be empty");
      c.budget = bu;
    }
    if (j.contains("constants")) {
      only_keys(j.at("constants"), {"d", "M", "M2", "G", "R", "eps"}, "constants");
      for (auto& [k, v] : j.at("constants").items())
        if (!v.is_number() || !(v.get<double>() > 0.0)) throw config_error("constants." + k + " must be positive");
      c.constants = j.at("constants");
    }
    if (j.contains("step_rule")) c.step_rule = parse_step_rule(j.at("step_rule").get<std::string>());
    if (j.contains("step_scale")) {
      c.step_scale = j.at("step_scale").get<double>();
      if (!(c.step_scale > 0.0)) throw config_error("step_scale must be positive");
    }
    if (j.contains("prox")) {
      const auto s = j.at("prox").get<std::string>();
      if (s == "euclidean") c.prox = ProxKind::Euclidean;
      else if (s == "entropy") c.prox = ProxKind::Entropy;
      else throw config_error("prox must be 'euclidean' or 'entropy'");
    }
    if (j.contains("exact_operator")) c.exact_operator = j.at("exact_operator").get<bool>();
    if (j.contains("start")) c.start = j.at("start").get<std::vector<double>>();
    if (j.contains("repeat")) c.repeat = detail::positive_count(j, "repeat", "config");
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    if (j.contains("timing")) c.timing = j.at("timing").get<bool>();
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  c.source = j;
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

struct CommandOptions {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> repeat;
  unsigned threads = 1;
};

inline void apply_overrides(ExperimentConfig& c, const CommandOptions& o) {
  if (o.out) {
    c.output = *o.out;
    c.source["output"] = *o.out;
  }
  if (o.seed) {
    c.seed = *o.seed;
    c.source["seed"] = *o.seed;
  }
  if (o.repeat) {
    if (*o.repeat == 0) throw config_error("repeat must be >= 1");
    c.repeat = *o.repeat;
    c.source["repeat"] = *o.repeat;
  }
}

// Problem constants: explicit overrides first, then problem metadata.
inline ProblemConstants resolve_constants(const ExperimentConfig& cfg, const StochasticProblem* prob) {
  const json& o = cfg.constants;
  ProblemConstants c;
  auto pick = [&](const char* k, std::optional<double> fallback) -> std::optional<double> {
    if (o.contains(k)) return o.at(k).get<double>();
    return fallback;
  };
  std::optional<double> d, M, M2, R;
  if (prob) {
    d = static_cast<double>(prob->dim);
    M = prob->M;
    M2 = prob->M2;
    const double diam = diameter(prob->set, prob->dim);
    if (std::isfinite(diam)) R = diam;
  }
  auto need = [](std::optional<double> v, const char* k) {
    if (!v || !(*v > 0.0)) throw config_error(std::string("constant ") + k + " is required");
    return *v;
  };
  c.d = need(pick("d", d), "d");
  c.M = need(pick("M", M), "M");
  c.M2 = need(pick("M2", M2), "M2");
  c.R = need(pick("R", R), "R");
  c.eps = need(pick("eps", std::nullopt), "eps");
  c.G = pick("G", prob ? prob->G : std::nullopt);
  c.validate();
  return c;
}

// ---- params ------------------------------------------------------------------

inline json params_json(const ExperimentConfig& cfg) {
  std::optional<StochasticProblem> prob;
  if (!cfg.problem.is_null() && cfg.problem.value("kind", "") != "bilinear" &&
      !(cfg.constants.contains("d") && cfg.constants.contains("M") && cfg.constants.contains("M2") &&
        cfg.constants.contains("R")))
    prob = problem_from_json(cfg.problem);
  const ProblemConstants c = resolve_constants(cfg, prob ? &*prob : nullptr);
  json plans = json::array();
  for (Scheme s : cfg.schemes) plans.push_back(to_json(plan(cfg.algorithm, c, s, cfg.feedback, cfg.p)));
  return plans.size() == 1 ? plans[0] : plans;
}

inline int cmd_params(const ExperimentConfig& cfg, std::ostream& os) {
  os << params_json(cfg).dump(2) << '\n';
  return exit_code::ok;
}

// ---- run ---------------------------------------------------------------------

struct RunOutcome {
  Scheme scheme;
  Trace trace;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw runtime_failure("cannot write '" + p.string() + "'");
  f << text;
}

}  // namespace detail

// One seeded run of a convex algorithm for a scheme.
inline Trace run_once(const ExperimentConfig& cfg, const StochasticProblem& prob, const ProblemConstants& c,
                      Scheme scheme, const FedTopology& topo, std::uint64_t seed, std::optional<double> f_star,
                      const std::string& hash) {
  const SmoothingConfig sc{scheme, cfg.feedback, smoothing_gamma(c, scheme)};
  AcSgdStepPolicy pol = default_step_policy(c, scheme, cfg.feedback, cfg.step_rule);
  pol.scale = cfg.step_scale;
  RunOptions o;
  o.seed = seed;
  o.config_hash = hash;
  o.f_star = f_star;
  o.timing = cfg.timing;
  if (cfg.start) o.start = DenseVector(*cfg.start);
  switch (cfg.algorithm) {
    case Algorithm::MbASGD: return run_minibatch_acc_sgd(prob, topo, sc, cfg.noise, pol, o);
    case Algorithm::SmASGD: return run_single_machine_acc_sgd(prob, topo, sc, cfg.noise, pol, o);
    default: throw unsupported_error(to_string(cfg.algorithm) + " has no simulator recursion (planner only)");
  }
}

inline Trace run_game_once(const ExperimentConfig& cfg, const SaddleProblem& game, Scheme scheme,
                           const FedTopology& topo, std::uint64_t seed, const std::string& hash) {
  SmpOptions o;
  o.scheme = scheme;
  o.feedback = cfg.feedback;
  o.exact_operator = cfg.exact_operator;
  o.prox = cfg.prox;
  o.noise = cfg.noise;
  o.seed = seed;
  o.config_hash = hash;
  o.timing = cfg.timing;
  if (cfg.start) o.start = DenseVector(*cfg.start);
  const double eps = cfg.constants.value("eps", 0.1);
  auto radius = [&](double d, double M2) {
    ProblemConstants c;
    c.d = d;
    c.M2 = M2 > 0.0 ? M2 : 1.0;
    c.eps = eps;
    return smoothing_gamma(c, scheme);
  };
  o.gamma_x = radius(static_cast<double>(game.dx), game.M2x);
  o.gamma_y = radius(static_cast<double>(game.dy), game.M2y);
  if (cfg.constants.contains("R")) o.R = cfg.constants.at("R").get<double>();
  if (cfg.algorithm == Algorithm::MbSMP) return run_minibatch_smp(game, topo, o);
  if (cfg.algorithm == Algorithm::SmSMP) return run_single_machine_smp(game, topo, o);
  throw config_error("a bilinear game needs MbSMP or SmSMP");
}

struct SchemeSummary {
  Scheme scheme;
  std::vector<double> errors;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> calls;
};

inline json summarize(const SchemeSummary& s) {
  json runs = json::array();
  for (std::size_t i = 0; i < s.errors.size(); ++i)
    runs.push_back({{"seed", s.seeds[i]}, {"final_error", s.errors[i]}, {"calls", s.calls[i]}});
  const double sd = detail::sd_of(s.errors);
  return {{"mean_error", detail::mean_of(s.errors)},
          {"std_error", sd},
          {"se", sd / std::sqrt(static_cast<double>(s.errors.size()))},
          {"runs", runs}};
}

// Executes `repeat` seeded runs per scheme; writes one CSV per run and summary.json.
inline json run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  if (!cfg.topology) throw config_error("run needs a topology {B, K, N}");
  if (cfg.problem.is_null()) throw config_error("run needs a problem");
  const FedTopology topo = *cfg.topology;
  const std::string hash = config_hash(cfg.source);
  const bool game_mode = cfg.problem.value("kind", "") == "bilinear";
  std::optional<StochasticProblem> prob;
  std::optional<SaddleProblem> game;
  std::optional<ProblemConstants> consts;
  std::optional<double> f_star;
  if (game_mode) {
    game = game_from_json(cfg.problem);
  } else {
    prob = problem_from_json(cfg.problem);
    consts = resolve_constants(cfg, &*prob);
    f_star = brute_force_min(*prob).value;
  }

  struct Job {
    Scheme scheme;
    std::uint64_t rep;
  };
  std::vector<Job> jobs;
  for (Scheme s : cfg.schemes)
    for (std::uint64_t r = 0; r < cfg.repeat; ++r) jobs.push_back({s, r});
  std::vector<Trace> traces(jobs.size());
  detail::parallel_for(jobs.size(), threads, [&](std::uint64_t i) {
    const std::uint64_t seed = cfg.seed + jobs[i].rep;
    traces[i] = game_mode ? run_game_once(cfg, *game, jobs[i].scheme, topo, seed, hash)
                          : run_once(cfg, *prob, *consts, jobs[i].scheme, topo, seed, f_star, hash);
  });

  std::filesystem::create_directories(cfg.output);
  json schemes = json::object();
  std::vector<SchemeSummary> sums;
  for (Scheme s : cfg.schemes) sums.push_back({s, {}, {}, {}});
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Trace& tr = traces[i];
    if (tr.aborted) throw runtime_failure(tr.diagnostic);
    std::ostringstream csv;
    tr.write_csv(csv);
    const std::string name = to_string(jobs[i].scheme) + "_run" + std::to_string(jobs[i].rep) + ".csv";
    detail::write_file(std::filesystem::path(cfg.output) / name, csv.str());
    auto& s = *std::find_if(sums.begin(), sums.end(), [&](const auto& x) { return x.scheme == jobs[i].scheme; });
    s.errors.push_back(tr.final_gap());
    s.seeds.push_back(tr.seed);
    s.calls.push_back(tr.total_calls);
  }
  for (const auto& s : sums) schemes[to_string(s.scheme)] = summarize(s);
  json summary{{"config_hash", hash},
               {"config", cfg.source},
               {"algorithm", to_string(cfg.algorithm)},
               {"feedback", to_string(cfg.feedback)},
               {"topology", {{"B", topo.B}, {"K", topo.K}, {"N", topo.N}}},
               {"error", game_mode ? "duality gap of the averaged point" : "f(x_ag) - f*"},
               {"schemes", schemes}};
  if (f_star) summary["f_star"] = *f_star;
  if (consts) {
    summary["constants"] = {{"d", consts->d}, {"M", consts->M}, {"M2", consts->M2}, {"R", consts->R}, {"eps", consts->eps}};
    if (consts->G) summary["constants"]["G"] = *consts->G;
  }
  if (sums.size() == 2) {
    const double a = detail::mean_of(sums[0].errors), b = detail::mean_of(sums[1].errors);
    summary["comparison"] = {{"lower_error", a <= b ? to_string(sums[0].scheme) : to_string(sums[1].scheme)},
                             {"ratio_" + to_string(sums[0].scheme) + "_over_" + to_string(sums[1].scheme), a / b}};
  }
  detail::write_file(std::filesystem::path(cfg.output) / "summary.json", summary.dump(2) + "\n");
  return summary;
}

inline int cmd_run(const ExperimentConfig& cfg, unsigned threads, std::ostream& os) {
  const json s = run_experiment(cfg, threads);
  for (auto& [name, v] : s.at("schemes").items())
    os << name << ": mean error " << v.at("mean_error").get<double>() << " (sd " << v.at("std_error").get<double>()
       << ", " << cfg.repeat << " runs)\n";
  os << "wrote " << (std::filesystem::path(cfg.output) / "summary.json").string() << '\n';
  return exit_code::ok;
}

// ---- sweep-k -----------------------------------------------------------------

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = detail::mean_of(ra), mb = detail::mean_of(rb);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

struct SweepRow {
  Scheme scheme;
  std::uint64_t K, N;
  std::vector<double> errors;
  double mean() const { return detail::mean_of(errors); }
  double se() const { return detail::sd_of(errors) / std::sqrt(static_cast<double>(errors.size())); }
};

inline std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, unsigned threads, std::ostream& warn) {
  if (!cfg.budget) throw config_error("sweep-k needs a budget {T, B, K}");
  if (cfg.algorithm != Algorithm::MbASGD) throw config_error("sweep-k runs the minibatch accelerated method (MbASGD)");
  if (cfg.problem.is_null()) throw config_error("sweep-k needs a problem");
  const Budget& bu = *cfg.budget;
  const StochasticProblem prob = problem_from_json(cfg.problem);
  const ProblemConstants c = resolve_constants(cfg, &prob);
  const double f_star = brute_force_min(prob).value;
  const std::string hash = config_hash(cfg.source);

  std::vector<SweepRow> rows;
  for (Scheme s : cfg.schemes)
    for (std::uint64_t K : bu.K) {
      if (bu.T % K != 0) {
        warn << "warning: K=" << K << " does not divide T=" << bu.T << "; skipped\n";
        continue;
      }
      rows.push_back({s, K, bu.T / K, std::vector<double>(cfg.repeat)});
    }
  const std::uint64_t jobs = rows.size() * cfg.repeat;
  detail::parallel_for(jobs, threads, [&](std::uint64_t i) {
    SweepRow& row = rows[i / cfg.repeat];
    const std::uint64_t rep = i % cfg.repeat;
    const Trace tr = run_once(cfg, prob, c, row.scheme, FedTopology{bu.B, row.K, row.N}, cfg.seed + rep, f_star, hash);
    if (tr.aborted) throw runtime_failure(tr.diagnostic);
    row.errors[rep] = tr.final_gap();
  });
  return rows;
}

inline json sweep_summary(const ExperimentConfig& cfg, const std::vector<SweepRow>& rows) {
  json out{{"config_hash", config_hash(cfg.source)}, {"config", cfg.source}, {"schemes", json::object()}};
  for (Scheme s : cfg.schemes) {
    std::vector<double> ks, errs;
    json table = json::array();
    for (const auto& r : rows)
      if (r.scheme == s) {
        ks.push_back(static_cast<double>(r.K));
        errs.push_back(r.mean());
        table.push_back({{"K", r.K}, {"N", r.N}, {"mean_err", r.mean()}, {"se", r.se()}});
      }
    json entry{{"rows", table}};
    if (ks.size() >= 2) entry["spearman_K_vs_error"] = spearman(ks, errs);
    out["schemes"][to_string(s)] = entry;
  }
  return out;
}

inline int cmd_sweep_k(const ExperimentConfig& cfg, unsigned threads, std::ostream& os) {
  const auto rows = sweep_k(cfg, threads, std::cerr);
  std::filesystem::create_directories(cfg.output);
  std::ostringstream csv;
  csv << "scheme,K,N,mean_err,se,repeat\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%.17g,%.17g,%llu\n", to_string(r.scheme).c_str(),
                  static_cast<unsigned long long>(r.K), static_cast<unsigned long long>(r.N), r.mean(), r.se(),
                  static_cast<unsigned long long>(cfg.repeat));
    csv << buf;
  }
  detail::write_file(std::filesystem::path(cfg.output) / "sweep.csv", csv.str());
  const json s = sweep_summary(cfg, rows);
  detail::write_file(std::filesystem::path(cfg.output) / "sweep_summary.json", s.dump(2) + "\n");
  os << csv.str();
  for (auto& [name, v] : s.at("schemes").items())
    if (v.contains("spearman_K_vs_error"))
      os << name << ": Spearman(K, error) = " << v.at("spearman_K_vs_error").get<double>() << '\n';
  return exit_code::ok;
}

// ---- validate ----------------------------------------------------------------

inline int cmd_validate(ValidateDepth depth, std::ostream& os) {
  const auto results = run_validation(depth);
  bool ok = true;
  for (const auto& r : results) {
    print_check(os, r);
    ok = ok && r.passed;
  }
  os << (ok ? "all checks passed" : "some checks failed") << '\n';
  return ok ? exit_code::ok : exit_code::validation;
}

}  // namespace zofl
