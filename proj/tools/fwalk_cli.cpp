#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fwalk/fwalk.hpp"

namespace {

using namespace fwalk;

enum Exit { kOk = 0, kConfig = 2, kValidation = 3, kNonConvergence = 4 };

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<double> tol;
};

RunConfig resolve(const Flags& f, const std::string& command) {
  nlohmann::json j = read_config_json(f.config);
  j["command"] = command;
  RunConfig c = parse_config(j);
  if (f.out) c.out_dir = *f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.tol) {
    c.phi_tol = *f.tol;
    c.hit_tol = *f.tol * 1e-2;
  }
  set_threads(c.threads);
  std::filesystem::create_directories(c.out_dir);
  return c;
}

nlohmann::json provenance(const RunConfig& c) {
  nlohmann::json j = c.source;
  j["command"] = c.command;
  j["seed"] = c.seed;
  j["tolerances"] = {{"hit", c.hit_tol}, {"phi", c.phi_tol}, {"power", c.power_tol}, {"sweep", c.sweep_tol}};
  return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

int run_report(const RunConfig& c) {
  const StepDistribution p = c.distribution();
  const WalkReport rep = walk_report(p, c.report_options());
  nlohmann::json j;
  j["config"] = provenance(c);
  j["report"] = to_json(rep);
  write_json(c.out_dir + "/report.json", j);
  write_text(std::cout, rep);
  return kOk;
}

int run_sweep(const RunConfig& c) {
  const StepDistribution p0 = c.distribution();
  const StepDistribution p1 = StepDistribution::from_weights(c.rank, c.sweep_end, StepDistribution::Check::Generating);
  std::vector<double> grid;
  for (std::size_t i = 0; i < c.sweep_points; ++i)
    grid.push_back(static_cast<double>(i) / static_cast<double>(c.sweep_points - 1));
  const SweepResult s = sweep(p0, p1, grid, c.sweep_tol, c.boundary_options());
  {
    std::ofstream csv(c.out_dir + "/sweep.csv");
    s.write_csv(csv);
  }
  nlohmann::json j;
  j["config"] = provenance(c);
  j["sweep"] = to_json(s);
  write_json(c.out_dir + "/sweep.json", j);
  std::cout << "points " << s.t.size() << "  max jump h " << s.max_jump_h << " (budget " << s.budget_h
            << ")  max jump ell " << s.max_jump_ell << " (budget " << s.budget_ell << ")"
            << (s.flagged ? "  FLAGGED" : "") << '\n';
  return s.flagged ? kValidation : kOk;
}

int run_validate(const RunConfig& c) {
  ValidationOptions o;
  o.hit_tol = c.hit_tol;
  o.phi_tol = c.phi_tol;
  o.power_tol = c.power_tol;
  o.seed = c.seed;
  o.mc_samples = c.mc_tv_samples;
  o.mc_depth = c.mc_tv_depth;
  if (c.depth) o.depth = c.depth;
  const auto results = validate_walk(c.distribution(), o);
  std::ofstream out(c.out_dir + "/validate.txt");
  write_table(out, results);
  write_table(std::cout, results);
  return all_passed(results) ? kOk : kValidation;
}

int run_schottky(const RunConfig& c) {
  SchottkyRep rho = c.schottky.empty() ? SchottkyRep::standard(c.schottky_lambda) : SchottkyRep::from_entries(c.schottky);
  if (rho.rank() != c.rank) fail(ErrorKind::Config, "schottky: representation rank differs from rank");
  const SchottkyCheck check = verify_schottky(rho);
  const StepDistribution p = c.distribution();
  const BoundaryRoute b = boundary_route(p, c.boundary_options());
  const GammaBoundary gb = gamma_boundary(rho, p, b.measure, 1e-3);
  const GammaEstimate gm = gamma_mc(rho, p, c.gamma_steps, c.gamma_samples, c.seed);
  nlohmann::json j;
  j["config"] = provenance(c);
  j["schottky"] = {{"min_gap", check.min_gap},
                   {"max_excess", check.max_excess},
                   {"gamma_boundary", to_json(gb.gamma)},
                   {"gamma_boundary_radius_error", gb.radius_error},
                   {"gamma_mc_displacement", to_json(gm.displacement)},
                   {"gamma_mc_displacement_difference", to_json(gm.displacement_difference)},
                   {"gamma_mc_norm", to_json(gm.norm)},
                   {"steps", gm.n},
                   {"samples", gm.samples}};
  write_json(c.out_dir + "/schottky.json", j);
  std::cout << "gamma boundary        " << gb.gamma.value << " +/- " << gb.gamma.error << '\n'
            << "gamma mc displacement " << gm.displacement.value << " +/- " << gm.displacement.error << '\n'
            << "gamma mc difference   " << gm.displacement_difference.value << " +/- "
            << gm.displacement_difference.error << '\n'
            << "gamma mc norm         " << gm.norm.value << " +/- " << gm.norm.error << '\n';
  return kOk;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument: return kConfig;
    case ErrorKind::NotGenerating:
    case ErrorKind::NotSchottky: return kValidation;
    default: return kNonConvergence;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy, drift and boundary measures of random walks on free groups"};
  app.require_subcommand(1);
  Flags flags;
  for (const char* name : {"report", "sweep", "validate", "schottky"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "configuration file (JSON)")->required();
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "seed, overriding the configuration");
    sub->add_option("--threads", flags.threads, "worker threads, 0 for all cores");
    sub->add_option("--tol", flags.tol, "target error of the kernel (hitting tolerance is 1e-2 of it)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig c = resolve(flags, command);
    if (command == "report") return run_report(c);
    if (command == "sweep") return run_sweep(c);
    if (command == "validate") return run_validate(c);
    return run_schottky(c);
  } catch (const Error& e) {
    std::cerr << "fwalk " << command << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "fwalk " << command << ": " << e.what() << '\n';
    return kNonConvergence;
  }
}
