#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <zofl/experiment.hpp>

namespace {

unsigned thread_count(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("ZOFL_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zeroth-order federated optimization toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::uint64_t repeat = 0;
  int threads = 0;
  std::string depth = "quick";

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config, "JSON config file");
    if (config_required) opt->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--repeat", repeat, "number of seeded runs");
    sub->add_option("--threads", threads, "worker threads (falls back to ZOFL_THREADS)");
  };
  auto* params = app.add_subcommand("params", "print the parameter plan as JSON");
  auto* run = app.add_subcommand("run", "run seeded experiments, write CSV traces and summary.json");
  auto* sweep = app.add_subcommand("sweep-k", "sweep local steps K at a fixed budget");
  auto* validate = app.add_subcommand("validate", "Monte Carlo checks of the estimators");
  add_common(params, true);
  add_common(run, true);
  add_common(sweep, true);
  add_common(validate, false);
  validate->add_option("--depth", depth, "quick or full")->check(CLI::IsMember({"quick", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : zofl::exit_code::config;
  }

  try {
    if (validate->parsed())
      return zofl::cmd_validate(depth == "full" ? zofl::ValidateDepth::Full : zofl::ValidateDepth::Quick, std::cout);

    zofl::ExperimentConfig cfg = zofl::load_config(config);
    zofl::CommandOptions o;
    if (!out.empty()) o.out = out;
    if (app.get_subcommands().front()->count("--seed") > 0) o.seed = seed;
    if (repeat > 0) o.repeat = repeat;
    zofl::apply_overrides(cfg, o);
    const unsigned nt = thread_count(threads);

    if (params->parsed()) return zofl::cmd_params(cfg, std::cout);
    if (run->parsed()) return zofl::cmd_run(cfg, nt, std::cout);
    if (sweep->parsed()) return zofl::cmd_sweep_k(cfg, nt, std::cout);
  } catch (const zofl::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return zofl::exit_code::config;
  } catch (const zofl::unsupported_error& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return zofl::exit_code::config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return zofl::exit_code::runtime;
  }
  return zofl::exit_code::ok;
}
