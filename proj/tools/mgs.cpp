#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using mgs::cli::Overrides;
  CLI::App app{"Guided diffusion sampling lab: DPS / CG with adaptive-moment guidance"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Run configuration (TOML or .json)");
    sub->add_option("--out", o.out, "Output root (default: $MGS_OUT_DIR, run.out_dir, ./results)");
    sub->add_option("--seed", o.seed, "Run seed");
    sub->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
    sub->add_option("--zeta", o.zeta, "Guidance noise coefficient(s), comma separated");
    sub->add_option("--method", o.method, "Method name(s), comma separated");
    sub->add_option("--steps", o.steps, "Sampling steps");
    sub->add_option("--rule", o.rule, "Step rule: ddpm or ddim");
    sub->add_option("--beta1", o.beta1, "Adam first-moment decay");
    sub->add_option("--beta2", o.beta2, "Adam second-moment decay");
    sub->add_option("--rho", o.rho, "Guidance strength (disables calibration)");
    sub->add_option("--chains", o.chains, "Chains per cell");
    sub->add_flag("--quiet,-q", o.quiet, "No progress output");
  };

  auto* sample = app.add_subcommand("sample", "Run a batch of chains and export trajectories");
  auto* sweep = app.add_subcommand("sweep", "Guidance-noise sweep: KL to the exact posterior");
  auto* ablate = app.add_subcommand("ablate", "Adam beta or step-budget ablation");
  auto* diagnose = app.add_subcommand("diagnose", "Cosine, loss and projection diagnostics for a method pair");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference and oracle agreement checks");
  for (auto* s : {sample, sweep, ablate, diagnose, gradcheck}) add_common(s);
  ablate->add_option("--kind", o.kind, "beta or steps")->check(CLI::IsMember({"beta", "steps"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sample->parsed()) return mgs::cli::cmd_sample(o, std::cout, std::cerr);
  if (sweep->parsed()) return mgs::cli::cmd_sweep(o, std::cout, std::cerr);
  if (ablate->parsed()) return mgs::cli::cmd_ablate(o, std::cout, std::cerr);
  if (diagnose->parsed()) return mgs::cli::cmd_diagnose(o, std::cout, std::cerr);
  return mgs::cli::cmd_gradcheck(o, std::cout, std::cerr);
}
