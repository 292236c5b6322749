#include "kldescent/catalog.hpp"
#include "kldescent/harness.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Nonmonotone proximal gradient solvers with convergence-framework audits"};
  app.set_version_flag("--version", kldescent::kVersion);
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Solve one experiment and audit its trace");
  run->add_option("config", config, "Experiment config (JSON)")->required();

  std::string param;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Run an experiment once per parameter value");
  sweep->add_option("config", config, "Experiment config (JSON)")->required();
  sweep->add_option("--param", param, "Parameter name, e.g. m, delta or problem.params.lambda")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  std::string trace;
  std::string report;
  kldescent::VerifyOverrides ov;
  auto* verify = app.add_subcommand("verify", "Re-audit an existing trace.csv");
  verify->add_option("trace", trace, "Trace CSV")->required();
  verify->add_option("--report", report, "Output report path (default: report.json next to the trace)");
  verify->add_option("--m", ov.m, "Memory length");
  verify->add_option("--a", ov.a, "H1 constant");
  verify->add_option("--tau", ov.tau, "H4 tau in (0,1)");
  verify->add_option("--mu", ov.mu, "H4 mu (default sqrt(b_bar/2))");
  verify->add_option("--kbar", ov.k_bar, "First k checked by H4 (default m+2)");
  verify->add_option("--lipschitz", ov.lipschitz, "Lipschitz constant of grad f for H3");
  verify->add_option("--delta", ov.delta, "Proximal weight of the extrapolated merit");
  verify->add_option("--algorithm", ov.algorithm, "Producer: npg_major, pgenls, pgnls or external");
  verify->add_option("--step-block", ov.step_block, "Framework step: x or z");
  verify->add_option("--phi", ov.phi_column, "Framework objective column: F or merit");

  auto* list = app.add_subcommand("list-problems", "List canned problems and their parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kldescent::kExitConfig;
  }

  if (*run) return kldescent::run(config, std::cout, std::cerr);
  if (*sweep) return kldescent::sweep(config, param, kldescent::split_values(values), std::cout, std::cerr);
  if (*verify) {
    if (!report.empty()) ov.report = report;
    return kldescent::verify(trace, ov, std::cout, std::cerr);
  }
  if (*list) {
    for (const auto& p : kldescent::list_problems())
      std::cout << p.id << "\n  " << p.summary << "\n  params: " << p.params << '\n';
  }
  return 0;
}
