// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
// Set ZOFL_THREADS to spread the experiment criteria over several cores.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <zofl/experiment.hpp>

using namespace zofl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned threads() {
  if (const char* e = std::getenv("ZOFL_THREADS")) {
    const int v = std::atoi(e);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

const json base_problem{{"kind", "simplex_l1inf"}, {"d", 100}, {"seed", 1}};

// 1. Mean of 1e5 estimates of grad <c, x> is within 3 SE of c in l2.
Outcome unbiasedness() {
  const std::size_t d = 50, n = 100000;
  RngStream cr(101, {0, 0, stream_tag::setup});
  DenseVector c(d);
  for (auto& v : c) v = cr.uniform(-1.0, 1.0);
  const StochasticProblem prob = make_linear_problem(c);
  const DenseVector x(d, 0.0);
  Outcome o{true, ""};
  for (Scheme sc : {Scheme::L1, Scheme::L2})
    for (Feedback fb : {Feedback::TwoPoint, Feedback::OnePoint}) {
      ZerothOrderOracle oracle(prob, NoiseModel::none());
      RngStream rng(102, {static_cast<std::uint64_t>(sc), static_cast<std::uint64_t>(fb), 0});
      std::vector<double> s(d, 0.0), s2(d, 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        const DenseVector g = estimate_grad(oracle, x, {sc, fb, 0.2}, rng).g;
        for (std::size_t i = 0; i < d; ++i) {
          s[i] += g[i];
          s2[i] += g[i] * g[i];
        }
      }
      double dev2 = 0, se2 = 0;
      for (std::size_t i = 0; i < d; ++i) {
        const double m = s[i] / n, var = (s2[i] - n * m * m) / (n - 1);
        dev2 += (m - c[i]) * (m - c[i]);
        se2 += var / n;
      }
      const double ratio = std::sqrt(dev2 / se2);
      o.pass = o.pass && ratio <= 3.0;
      o.detail += to_string(sc) + "/" + to_string(fb) + fmt(" %.2fSE ", ratio);
    }
  return o;
}

// 2. f <= f_gamma <= f + slack at 20 random simplex points, plain Monte Carlo
// over the unit ball.
Outcome sandwich() {
  const std::size_t d = 100, n = 100000, points = 20;
  const StochasticProblem prob = problem_from_json(base_problem);
  const double eps = 0.1;
  Outcome o{true, ""};
  for (Scheme sc : {Scheme::L1, Scheme::L2}) {
    const Norm nb = sc == Scheme::L1 ? Norm::L1 : Norm::L2;
    const double gamma = sc == Scheme::L1 ? std::sqrt(100.0) * eps / (4 * prob.M2) : eps / (2 * prob.M2);
    const double slack = sc == Scheme::L1 ? 2.0 / std::sqrt(100.0) * gamma * prob.M2 : gamma * prob.M2;
    RngStream pr(201, {static_cast<std::uint64_t>(sc), 0, stream_tag::setup});
    int ok = 0;
    for (std::size_t k = 0; k < points; ++k) {
      DenseVector x(d);
      double tot = 0;
      for (auto& v : x) tot += (v = -std::log(pr.uniform()));
      x /= tot;
      RngStream rng(202, {static_cast<std::uint64_t>(sc), k, 0});
      double s = 0, s2 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        DenseVector z = sample_ball(d, nb, rng);
        z *= gamma;
        z += x;
        const double f = prob.objective(z);
        s += f;
        s2 += f * f;
      }
      const double m = s / n, se = std::sqrt((s2 - n * m * m) / (n - 1) / n);
      const double f = prob.objective(x);
      ok += (m >= f - 3 * se && m <= f + slack + 3 * se);
    }
    o.pass = o.pass && ok == static_cast<int>(points);
    o.detail += to_string(sc) + " " + std::to_string(ok) + "/20 ";
  }
  return o;
}

// 3. Second-moment bounds in 16 cells; the planner kappa is first checked
// against the closed forms it is built from.
Outcome second_moments() {
  const double d = 100, lnd = std::log(d);
  const double k1 = 48 * std::pow(1 + std::sqrt(2.0), 2);
  bool kap = rel(kappa(1, d, Scheme::L1, Feedback::TwoPoint), k1) < 1e-12 &&
             rel(kappa(1, d, Scheme::L2, Feedback::TwoPoint), std::sqrt(2.0) * lnd) < 1e-12 &&
             rel(kappa(2, d, Scheme::L2, Feedback::OnePoint), 2 * d * d) < 1e-12 &&
             rel(kappa(2, d, Scheme::L2, Feedback::TwoPoint), std::sqrt(2.0) * 2 * d) < 1e-12;
  const auto cells = check_second_moments(100000);
  int ok = 0;
  double worst = 0;
  for (const auto& c : cells) {
    ok += c.passed;
    worst = std::max(worst, c.measured / c.bound);
  }
  return {kap && ok == 16 && cells.size() == 16,
          std::to_string(ok) + "/" + std::to_string(cells.size()) + " cells, worst ratio " + fmt("%.3g", worst) +
              (kap ? "" : ", kappa mismatch")};
}

// 4. Bias slope against delta within a factor 3 of d/gamma or sqrt(d)/gamma.
Outcome noise_bias() {
  const auto res = check_noise_bias(100000);
  Outcome o{true, ""};
  for (const auto& r : res) {
    o.pass = o.pass && r.passed;
    o.detail += fmt("%.2f ", r.measured / r.bound);
  }
  o.detail = "slope/ref: " + o.detail;
  return o;
}

// 5. params output against hand-evaluated formulas.
Outcome planner_values() {
  auto params = [](const std::string& scheme, const std::string& fb, int p, bool with_g) {
    json consts{{"d", 100}, {"M", 1}, {"M2", 1}, {"R", 1}, {"eps", 0.1}};
    if (with_g) consts["G"] = 1;
    return params_json(parse_config(
        json{{"algorithm", "MbASGD"}, {"scheme", scheme}, {"feedback", fb}, {"p", p}, {"constants", consts}}));
  };
  const double s2 = std::sqrt(2.0), lnd = std::log(100.0);
  struct Want {
    const char* field;
    double value;
  };
  bool ok = true;
  int checked = 0;
  auto check = [&](const json& j, std::initializer_list<Want> want) {
    for (const auto& w : want) {
      ++checked;
      if (rel(j.at(w.field).get<double>(), w.value) > 1e-9) {
        ok = false;
        std::cerr << "  mismatch " << w.field << ": " << j.at(w.field) << " vs " << w.value << '\n';
      }
    }
  };
  // l2, two-point, p=1: gamma = eps/2, L = sqrt(d)/gamma, N = ceil(4 sqrt3 d^(1/4) / eps)
  const double ka = s2 * lnd;
  check(params("L2", "TwoPoint", 1, false),
        {{"kappa", ka}, {"gamma", 0.05}, {"L", 200}, {"delta_max", 0.01 / 120}, {"N", 220}, {"K", 1},
         {"B", std::ceil(1152 * ka / (220 * 0.01))}});
  // l1, two-point, p=1: gamma = sqrt(d) eps / 4, L = d/(2 gamma), N = ceil(4 sqrt6 d^(1/4) / eps)
  const double kb = 48 * (1 + s2) * (1 + s2);
  const double nb = std::ceil(4 * std::sqrt(6.0) * std::sqrt(10.0) * 10);
  check(params("L1", "TwoPoint", 1, false),
        {{"kappa", kb}, {"gamma", 0.25}, {"L", 200}, {"delta_max", 0.01 / 240}, {"N", nb}, {"K", 1},
         {"B", std::ceil(1152 * kb / (nb * 0.01))}});
  // l2, one-point, p=2: kappa = min(2, ln d) d^2
  check(params("L2", "OnePoint", 2, true), {{"kappa", 2e4}, {"gamma", 0.05}});
  return {ok, std::to_string(checked) + " fields within 1e-9"};
}

ExperimentConfig experiment_config(json extra) {
  json j{{"problem", base_problem},
         {"algorithm", "MbASGD"},
         {"scheme", json::array({"L1", "L2"})},
         {"constants", {{"eps", 0.001}}},
         {"repeat", 20},
         {"seed", 1000}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  return parse_config(j);
}

// 6. Fixed budget, growing K: error rises with K.
Outcome k_sweep() {
  std::vector<std::uint64_t> ks;
  for (std::uint64_t k = 1; k <= 6561; k *= 3) ks.push_back(k);
  const ExperimentConfig cfg = experiment_config({{"budget", {{"T", 6561}, {"B", 8}, {"K", ks}}}});
  std::ostringstream warn;
  const auto rows = sweep_k(cfg, threads(), warn);
  Outcome o{rows.size() == 18, ""};
  for (Scheme sc : {Scheme::L1, Scheme::L2}) {
    std::vector<double> kk, err;
    const SweepRow *first = nullptr, *last = nullptr;
    for (const auto& r : rows)
      if (r.scheme == sc) {
        kk.push_back(static_cast<double>(r.K));
        err.push_back(r.mean());
        if (r.K == 1) first = &r;
        if (r.K == 6561) last = &r;
      }
    const double rho = spearman(kk, err);
    const double pooled = std::sqrt(first->se() * first->se() + last->se() * last->se());
    const double margin = (last->mean() - first->mean()) / pooled;
    o.pass = o.pass && rho > 0.5 && margin > 2.0;
    o.detail += to_string(sc) + fmt(": rho=%.2f err(K=1)=%.4g err(K=3^8)=%.4g gap=%.1fSE  ", rho, first->mean(),
                                    last->mean(), margin);
  }
  return o;
}

// 7. Noise raises the error; the l1 vs l2 comparison is reported.
Outcome noise_effect() {
  auto mean_err = [](const json& s, const char* sc) { return s.at("schemes").at(sc).at("mean_error").get<double>(); };
  const std::string out = (std::filesystem::temp_directory_path() / "zofl_acceptance_noise").string();
  json topo{{"B", 8}, {"K", 9}, {"N", 729}};
  const json clean = run_experiment(experiment_config({{"topology", topo}, {"output", out + "/clean"}}), threads());
  json noisy_problem = base_problem;
  noisy_problem["noise"] = {{"kind", "uniform"}, {"level", 6e-5}};
  const json noisy =
      run_experiment(experiment_config({{"topology", topo}, {"problem", noisy_problem}, {"output", out + "/noisy"}}), threads());
  std::filesystem::remove_all(out);
  Outcome o{true, ""};
  for (const char* sc : {"L1", "L2"}) {
    const double a = mean_err(clean, sc), b = mean_err(noisy, sc);
    o.pass = o.pass && b > a;
    o.detail += std::string(sc) + fmt(": %.4g -> %.4g  ", a, b);
  }
  const bool l1_better = mean_err(noisy, "L1") < mean_err(noisy, "L2");
  o.detail += std::string("under noise ") + (l1_better ? "L1" : "L2") + " is lower" +
              (l1_better ? " (as expected)" : " (L1 was expected lower)");
  return o;
}

// 8. Mirror prox against its guaranteed bounds.
Outcome smp_bounds() {
  const SaddleProblem g = make_bilinear_game(Matrix::from_rows({{0, 1}, {1, 0}}));
  SmpOptions ex;
  ex.exact_operator = true;
  ex.start = DenseVector{1, 0, 0, 1};
  const SmpResolved re = resolve_smp(g, ex);
  const double gap_exact = run_minibatch_smp(g, {1, 1, 1000}, ex).final_gap();
  const double bound_exact = 2 * 1.75 * re.L * re.R * re.R / 1000;

  SmpOptions st;
  ProblemConstants c;
  c.d = 2;
  c.M2 = g.M2x;
  c.eps = 0.1;
  st.gamma_x = st.gamma_y = smoothing_gamma(c, Scheme::L2);
  const SmpResolved rs = resolve_smp(g, st);
  std::vector<double> gaps(20);
  detail::parallel_for(20, threads(), [&](std::uint64_t s) {
    SmpOptions o = st;
    o.seed = 500 + s;
    gaps[s] = run_single_machine_smp(g, {1, 1, 10000}, o).final_gap();
  });
  double mean = 0;
  for (double v : gaps) mean += v / 20;
  const double bound_st = 2 * 7 * rs.sigma * rs.R / std::sqrt(1e4);
  return {gap_exact <= bound_exact && mean <= bound_st,
          fmt("exact gap %.3g <= %.3g; stochastic mean gap %.3g <= %.3g", gap_exact, bound_exact, mean, bound_st)};
}

// 9. Same seed gives the same bytes; call totals follow the topology.
Outcome determinism() {
  const StochasticProblem prob = make_simplex_test_problem(30, 9);
  ProblemConstants c;
  c.d = 30;
  c.M = prob.M;
  c.M2 = prob.M2;
  c.G = prob.G;
  c.R = std::sqrt(2.0);
  c.eps = 0.01;
  auto csv = [](const Trace& t) {
    std::ostringstream s;
    t.write_csv(s);
    return s.str();
  };
  bool same = true;
  int ok = 0, total = 0;
  const FedTopology topos[] = {{3, 4, 5}, {2, 1, 7}, {1, 6, 2}};
  for (Scheme sc : {Scheme::L1, Scheme::L2})
    for (Feedback fb : {Feedback::TwoPoint, Feedback::OnePoint}) {
      const std::uint64_t m = fb == Feedback::TwoPoint ? 2 : 1;
      const SmoothingConfig cfg{sc, fb, smoothing_gamma(c, sc)};
      const AcSgdStepPolicy pol = default_step_policy(c, sc, fb);
      RunOptions a;
      a.seed = 77;
      a.config_hash = "acceptance";
      RunOptions b = a;
      b.lanes = 3;
      const NoiseModel noise = NoiseModel::uniform(1e-4);
      const FedTopology& t0 = topos[0];
      const Trace x = run_minibatch_acc_sgd(prob, t0, cfg, noise, pol, a);
      same = same && csv(x) == csv(run_minibatch_acc_sgd(prob, t0, cfg, noise, pol, a)) &&
             csv(x) == csv(run_minibatch_acc_sgd(prob, t0, cfg, noise, pol, b));
      ++total;
      ok += x.total_calls == t0.N * t0.K * t0.B * m;
      const FedTopology& t1 = topos[1];
      ++total;
      ok += run_minibatch_acc_sgd(prob, t1, cfg, noise, pol, a).total_calls == t1.N * t1.K * t1.B * m;
      const FedTopology& t2 = topos[2];
      const Trace s = run_single_machine_acc_sgd(prob, {5, t2.K, t2.N}, cfg, noise, pol, a);
      same = same && csv(s) == csv(run_single_machine_acc_sgd(prob, {5, t2.K, t2.N}, cfg, noise, pol, a));
      ++total;
      ok += s.total_calls == t2.N * t2.K * m;
    }
  return {same && ok == total && total == 12,
          std::to_string(ok) + "/" + std::to_string(total) + " call totals exact; CSV " +
              (same ? "identical" : "differs") + " across repeats and lane counts"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> all{{"estimator unbiasedness", unbiasedness},
                                   {"smoothing sandwich", sandwich},
                                   {"second-moment bounds", second_moments},
                                   {"noise-bias scaling", noise_bias},
                                   {"planner spot values", planner_values},
                                   {"local steps vs error at fixed budget", k_sweep},
                                   {"noise raises error", noise_effect},
                                   {"mirror prox bounds", smp_bounds},
                                   {"determinism and accounting", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[i].fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, o.detail.c_str(), sec);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, all.size());
  return failed == 0 ? 0 : 1;
}
