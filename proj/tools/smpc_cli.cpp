// Batch front end: smpc_cli {synth|verify|simulate|report} --config FILE [--out DIR]
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "smpc/smpc.h"

namespace {

struct Options
{
  std::string config;
  std::string out;
  int threads = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int fail_with_last_error(smpc_status status)
{
  std::fprintf(stderr, "%s\n", smpc_last_error_json());
  return static_cast<int>(status);
}

int run(const std::string & command, const Options & opt)
{
  smpc_experiment * exp = nullptr;
  smpc_status st = smpc_experiment_open(opt.config.c_str(), &exp);
  if (st != SMPC_OK) { return fail_with_last_error(st); }
  if (!opt.out.empty()) { smpc_experiment_set_output_dir(exp, opt.out.c_str()); }
  smpc_experiment_set_threads(exp, opt.threads);
  if (opt.seed_set) { smpc_experiment_set_master_seed(exp, opt.seed); }

  const char * text = nullptr;
  if (command == "synth") {
    st = smpc_experiment_synth(exp);
  } else if (command == "verify") {
    st = smpc_experiment_verify(exp);
  } else if (command == "simulate") {
    st = smpc_experiment_simulate(exp);
  } else {
    st = smpc_experiment_report(exp, &text);
  }
  int code = 0;
  if (st == SMPC_OK) {
    if (text != nullptr) { std::fputs(text, stdout); }
    std::printf("%s: ok (%s)\n", command.c_str(), smpc_experiment_output_dir(exp));
  } else {
    code = fail_with_last_error(st);
  }
  smpc_experiment_close(exp);
  return code;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Stochastic MPC synthesis, certificates and closed-loop simulation"};
  app.require_subcommand(1);
  Options opt;
  std::string command;
  const std::pair<const char *, const char *> commands[] = {
      {"synth", "build the controller and write controller/xf/xinf artifacts"},
      {"verify", "drift, small-set and ISS certificates"},
      {"simulate", "closed-loop ensemble, membership curve and time averages"},
      {"report", "summarise the artifacts already in the output directory"}};
  for (const auto & [name, help] : commands) {
    CLI::App * sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "experiment JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (overrides output.dir)");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed-override", opt.seed, "replace simulation.master_seed")
        ->each([&](const std::string &) { opt.seed_set = true; });
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    return app.exit(e);
  }
  return run(command, opt);
}
