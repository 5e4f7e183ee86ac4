#include "torus_schrodinger/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Sinkhorn solver and contraction checks for entropic transport on the flat torus"};
  std::string command;
  ts::CommandOptions opts;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("command", command, "solve | rates | hjb-check | couple | verify")
      ->required()
      ->check(CLI::IsMember({"solve", "rates", "hjb-check", "couple", "verify"}));
  app.add_option("--config", opts.config_path, "experiment config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Monte Carlo seed (overrides mc.seed)");
  auto* out_opt = app.add_option("--out", out, "output directory (overrides output.dir)");
  app.add_flag("--quick", opts.quick, "reduced Monte Carlo path counts");
  app.add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) opts.seed = seed;
  if (*out_opt) opts.out = out;
  return ts::run_command(command, opts, std::cout);
}
