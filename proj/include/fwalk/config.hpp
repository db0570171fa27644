#pragma once

// Run configuration read from a JSON file. Field errors carry their path,
// for example "support[2].p".

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/observables.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

struct RunConfig {
  std::string command = "report";
  int rank = 2;
  std::vector<std::pair<Word, double>> support;
  std::vector<std::pair<Word, double>> sweep_end;  ///< second endpoint of a sweep
  std::size_t sweep_points = 21;

  double hit_tol = 1e-8;
  double phi_tol = 1e-6;
  double power_tol = 1e-12;
  double sweep_tol = 1e-4;
  std::size_t depth = 0;

  std::size_t convolution_n = 12;
  std::size_t mc_samples = 10'000;
  std::size_t mc_steps = 400;
  std::size_t mc_tv_depth = 3;
  std::size_t mc_tv_samples = 100'000;

  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string out_dir = ".";
  std::size_t table_cap = kDefaultTableCap;
  std::size_t region_nodes = 6'000'000;

  std::vector<std::array<double, 4>> schottky;  ///< empty means the standard representation
  double schottky_lambda = 3.0;
  std::size_t gamma_steps = 2000;
  std::size_t gamma_samples = 10'000;

  nlohmann::json source;  ///< the parsed input, echoed into outputs

  StepDistribution distribution() const {
    return StepDistribution::from_weights(rank, support, StepDistribution::Check::Generating);
  }

  BoundaryOptions boundary_options() const {
    BoundaryOptions o;
    o.hit_tol = hit_tol;
    o.phi_tol = phi_tol;
    o.power_tol = power_tol;
    o.depth = depth;
    o.hitting.max_nodes = region_nodes;
    return o;
  }

  ReportOptions report_options() const {
    ReportOptions o;
    o.boundary = boundary_options();
    o.convolution_n = convolution_n;
    o.mc_samples = mc_samples;
    o.mc_steps = mc_steps;
    o.mc_tv_depth = mc_tv_depth;
    o.mc_tv_samples = mc_tv_samples;
    o.seed = seed;
    o.table_cap = table_cap;
    return o;
  }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, const std::string& msg) {
  fail(ErrorKind::Config, path + ": " + msg);
}

template <class T>
T get_field(const nlohmann::json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    config_error(path + key, std::string("wrong type (") + e.what() + ")");
  }
}

inline double positive(double v, const std::string& path) {
  if (!(v > 0.0)) config_error(path, "must be > 0");
  return v;
}

inline std::vector<std::pair<Word, double>> parse_support(const nlohmann::json& arr, int rank, const std::string& path) {
  if (!arr.is_array() || arr.empty()) config_error(path, "must be a nonempty array");
  std::vector<std::pair<Word, double>> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string here = path + "[" + std::to_string(i) + "]";
    const auto& e = arr[i];
    if (!e.is_object() || !e.contains("word") || !e.contains("p")) config_error(here, "needs fields word and p");
    if (!e["word"].is_string()) config_error(here + ".word", "must be a string");
    if (!e["p"].is_number()) config_error(here + ".p", "must be a number");
    const std::string ws = e["word"].get<std::string>();
    Word w;
    if (ws != "e" && !ws.empty()) {
      try {
        w = parse_word(ws);
      } catch (const Error& err) {
        config_error(here + ".word", err.what());
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k)
      if (std::abs(w[k]) > rank) config_error(here + ".word", "letter beyond rank " + std::to_string(rank));
    out.push_back({w, positive(e["p"].get<double>(), here + ".p")});
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::get_field;
  if (!j.is_object()) detail::config_error("(root)", "must be an object");
  RunConfig c;
  c.source = j;
  c.command = get_field<std::string>(j, "command", "", c.command);
  if (c.command != "report" && c.command != "sweep" && c.command != "validate" && c.command != "schottky")
    detail::config_error("command", "must be one of report, sweep, validate, schottky");
  c.rank = get_field<int>(j, "rank", "", c.rank);
  if (c.rank < 1) detail::config_error("rank", "must be >= 1");
  if (!j.contains("support")) detail::config_error("support", "missing");
  c.support = detail::parse_support(j["support"], c.rank, "support");

  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    c.hit_tol = detail::positive(get_field<double>(t, "hit", "tolerances.", c.hit_tol), "tolerances.hit");
    c.phi_tol = detail::positive(get_field<double>(t, "phi", "tolerances.", c.phi_tol), "tolerances.phi");
    c.power_tol = detail::positive(get_field<double>(t, "power", "tolerances.", c.power_tol), "tolerances.power");
    c.sweep_tol = detail::positive(get_field<double>(t, "sweep", "tolerances.", c.sweep_tol), "tolerances.sweep");
  }
  c.depth = get_field<std::size_t>(j, "depth", "", c.depth);
  c.seed = get_field<std::uint64_t>(j, "seed", "", c.seed);
  c.threads = get_field<std::size_t>(j, "threads", "", c.threads);
  if (j.contains("output")) c.out_dir = get_field<std::string>(j["output"], "dir", "output.", c.out_dir);
  if (j.contains("memory")) {
    c.table_cap = get_field<std::size_t>(j["memory"], "table_entries", "memory.", c.table_cap);
    c.region_nodes = get_field<std::size_t>(j["memory"], "region_nodes", "memory.", c.region_nodes);
  }
  if (j.contains("report")) {
    const auto& r = j["report"];
    c.convolution_n = get_field<std::size_t>(r, "convolution_n", "report.", c.convolution_n);
    c.mc_samples = get_field<std::size_t>(r, "mc_samples", "report.", c.mc_samples);
    c.mc_steps = get_field<std::size_t>(r, "mc_steps", "report.", c.mc_steps);
    c.mc_tv_depth = get_field<std::size_t>(r, "mc_tv_depth", "report.", c.mc_tv_depth);
    c.mc_tv_samples = get_field<std::size_t>(r, "mc_tv_samples", "report.", c.mc_tv_samples);
    if (c.convolution_n != 0 && c.convolution_n < 4) detail::config_error("report.convolution_n", "must be 0 or >= 4");
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    if (s.contains("end")) c.sweep_end = detail::parse_support(s["end"], c.rank, "sweep.end");
    c.sweep_points = get_field<std::size_t>(s, "points", "sweep.", c.sweep_points);
    if (c.sweep_points < 4) detail::config_error("sweep.points", "must be >= 4");
  }
  if (c.command == "sweep") {
    if (c.sweep_end.empty()) detail::config_error("sweep.end", "required for the sweep command");
    if (c.sweep_end.size() != c.support.size()) detail::config_error("sweep.end", "must list the same words as support");
    for (std::size_t i = 0; i < c.support.size(); ++i)
      if (!(c.sweep_end[i].first == c.support[i].first))
        detail::config_error("sweep.end[" + std::to_string(i) + "].word", "must match support[" + std::to_string(i) + "].word");
  }
  if (j.contains("schottky")) {
    const auto& s = j["schottky"];
    c.schottky_lambda = detail::positive(get_field<double>(s, "lambda", "schottky.", c.schottky_lambda), "schottky.lambda");
    c.gamma_steps = get_field<std::size_t>(s, "steps", "schottky.", c.gamma_steps);
    c.gamma_samples = get_field<std::size_t>(s, "samples", "schottky.", c.gamma_samples);
    if (s.contains("generators")) {
      const auto& g = s["generators"];
      if (!g.is_array()) detail::config_error("schottky.generators", "must be an array");
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string here = "schottky.generators[" + std::to_string(i) + "]";
        if (!g[i].is_array() || g[i].size() != 4) detail::config_error(here, "must hold four matrix entries a b c d");
        std::array<double, 4> m{};
        for (std::size_t k = 0; k < 4; ++k) {
          if (!g[i][k].is_number()) detail::config_error(here + "[" + std::to_string(k) + "]", "must be a number");
          m[k] = g[i][k].get<double>();
        }
        if (std::abs(m[0] * m[3] - m[1] * m[2] - 1.0) > 1e-12) detail::config_error(here, "determinant must be 1");
        c.schottky.push_back(m);
      }
      if (static_cast<int>(c.schottky.size()) != c.rank)
        detail::config_error("schottky.generators", "needs one matrix per generator");
    }
  }
  return c;
}

inline nlohmann::json read_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, path + ": cannot open");
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Config, path + ": " + e.what());
  }
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_config_json(path)); }

}  // namespace fwalk
