// sliceforge command-line tool: validate, evaluate, solve, solve-reconfig,
// simulate. Writes a JSON report to --out (stdout by default).

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "report_writer.hpp"
#include "sliceforge/sliceforge.hpp"

namespace {

using nlohmann::json;
using namespace sliceforge;

constexpr int kExitValidation = 1;
constexpr int kExitNonConvergence = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("error writing '" + path + "'");
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

unsigned threads_from_env() {
  const char* v = std::getenv("SLICEFORGE_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) {
    throw ValidationError("SLICEFORGE_THREADS must be a non-negative integer");
  }
  return static_cast<unsigned>(n);
}

// C proportional to the no-blocking load on each logical entity, scaled up
// until the first physical entity is full.
CapacityAllocation proportional_allocation(const NetworkModel& model) {
  std::vector<double> weight(model.logical_count(), 0.0);
  for (std::size_t i = 0; i < model.logical_count(); ++i) {
    for (std::size_t r = 0; r < model.flow_count(); ++r) {
      weight[i] += model.demand(i, r) * model.flows()[r].offered;
    }
  }
  const auto use = physical_load(model, weight);
  double scale = INFINITY;
  for (std::size_t k = 0; k < use.size(); ++k) {
    if (use[k] > 0.0) scale = std::min(scale, model.physicals()[k].capacity / use[k]);
  }
  CapacityAllocation alloc{std::vector<double>(model.logical_count(), 0.0)};
  if (std::isfinite(scale)) {
    for (std::size_t i = 0; i < weight.size(); ++i) alloc[i] = weight[i] * scale;
  }
  return alloc;
}

// --alloc accepts "proportional", an inline JSON array, or a file holding
// either an array or an object keyed by logical id.
CapacityAllocation parse_allocation(const NetworkModel& model, const std::string& arg,
                                    std::string& source) {
  if (arg == "proportional") {
    source = "proportional (heuristic)";
    return proportional_allocation(model);
  }
  std::string text = arg;
  source = "inline";
  if (arg.empty() || arg.front() != '[') {
    text = read_file(arg);
    source = arg;
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("allocation: " + std::string(e.what()));
  }
  CapacityAllocation alloc{std::vector<double>(model.logical_count(), 0.0)};
  if (doc.is_array()) {
    if (doc.size() != model.logical_count()) {
      throw ValidationError("allocation has " + std::to_string(doc.size()) +
                            " entries, model has " +
                            std::to_string(model.logical_count()) + " logical entities");
    }
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (!doc[i].is_number()) throw ParseError("allocation entries must be numbers");
      alloc[i] = doc[i].get<double>();
    }
  } else if (doc.is_object()) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const auto idx = model.logical_index(it.key());
      if (!idx) throw ValidationError("allocation names unknown logical '" + it.key() + "'");
      if (!it.value().is_number()) throw ParseError("allocation entries must be numbers");
      alloc[*idx] = it.value().get<double>();
    }
  } else {
    throw ParseError("allocation must be a JSON array or object");
  }
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (!(std::isfinite(alloc[i]) && alloc[i] >= 0.0)) {
      throw ValidationError("allocation for '" + model.logicals()[i].id +
                            "' must be finite and >= 0");
    }
  }
  return alloc;
}

json vector_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

json steps_json(const SolveTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"phi", s.phi}, {"gap", s.gap}, {"step", s.step}});
  }
  return steps;
}

// Fixed point and diagnostics at alloc; fills entities, flows and scalars.
bool evaluate_into(json& report, const NetworkModel& model, const CapacityAllocation& alloc,
                   std::string& csv) {
  const auto state = solve_fixed_point(model, alloc);
  const auto diag = diagnostics(model, alloc, state);
  const auto feas = check_feasible(model, alloc);

  json entities = json::array();
  std::ostringstream table;
  table << std::setprecision(17) << "id,C,rho,B\n";
  for (std::size_t i = 0; i < model.logical_count(); ++i) {
    const auto& id = model.logicals()[i].id;
    entities.push_back({{"id", id},
                        {"C", alloc[i]},
                        {"rho", state.rho[i]},
                        {"B", state.blocking[i]},
                        {"utilization_measure", diag.utilization_measures[i]}});
    table << id << ',' << alloc[i] << ',' << state.rho[i] << ',' << state.blocking[i] << '\n';
  }
  csv = table.str();
  json flows = json::array();
  for (std::size_t r = 0; r < model.flow_count(); ++r) {
    flows.push_back({{"id", model.flows()[r].id},
                     {"offered", model.flows()[r].offered},
                     {"carried", state.carried_per_flow[r]}});
  }
  report["entities"] = entities;
  report["flows"] = flows;
  auto& s = report["scalars"];
  s["T"] = diag.T;
  s["Tw"] = diag.Tw;
  s["Q"] = diag.Q;
  s["eps"] = diag.eps;
  s["eps_bound"] = diag.eps_bound;
  s["L"] = diag.L;
  s["B_max"] = diag.B_max;
  report["fixed_point"] = {{"converged", state.converged},
                           {"iterations", state.iterations},
                           {"residual", state.residual}};
  json blocked = json::array();
  for (auto i : state.fully_blocked) blocked.push_back(model.logicals()[i].id);
  report["fixed_point"]["fully_blocked"] = blocked;
  report["feasibility"] = {{"ok", feas.ok},
                           {"max_violation", feas.max_violation},
                           {"slack", vector_json(feas.slack)}};
  return state.converged;
}

// phi at alloc plus the soft check against the fixed-point objective.
bool phi_into(json& report, const NetworkModel& model, const CapacityAllocation& alloc,
              const InnerOptions& opts) {
  const auto sol = phi(model, alloc, opts);
  auto& s = report["scalars"];
  s["phi"] = sol.phi;
  if (s.contains("Q")) s["phi_minus_Q"] = sol.phi - s["Q"].get<double>();
  report["inner"] = {{"y", vector_json(sol.y)},
                     {"grad_norm", sol.grad_norm},
                     {"iterations", sol.iterations},
                     {"converged", sol.converged}};
  return sol.converged;
}

struct Common {
  std::string model_path;
  std::string out;
  std::string csv;
  bool lenient = false;
  bool timestamp = false;
};

struct Loaded {
  NetworkModel model;
  std::string hash;
};

Loaded load(const Common& c) {
  const std::string text = read_file(c.model_path);
  return {load_model(text, c.lenient ? ParseMode::lenient : ParseMode::strict),
          sha256_hex(text)};
}

json base_report(const std::string& command, const Common& c, const Loaded& in) {
  json r;
  r["report_version"] = 1;
  r["tool_version"] = "0.1.0";
  r["command"] = command;
  r["input"] = {{"path", c.model_path}, {"sha256", in.hash}};
  r["model"] = {{"physical", in.model.physical_count()},
                {"logical", in.model.logical_count()},
                {"flows", in.model.flow_count()}};
  if (c.timestamp) r["generated_at"] = utc_now();
  return r;
}

void emit(const Common& c, const json& report, const std::string& csv) {
  const std::string text = tools::to_report_text(report);
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
  } else {
    write_file(c.out, text);
  }
  if (!c.csv.empty()) write_file(c.csv, csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacity allocation for logical entities over shared physical capacity"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("model", common.model_path, "Model file (JSON)")->required();
    sub->add_option("--out", common.out, "Report path (default stdout)");
    sub->add_option("--csv", common.csv, "Per-entity CSV path");
    sub->add_flag("--lenient", common.lenient, "Ignore unknown keys in the model file");
    sub->add_flag("--timestamp", common.timestamp, "Record generation time in the report");
  };

  auto* validate_cmd = app.add_subcommand("validate", "Load and validate a model");
  add_common(validate_cmd);

  std::string alloc_arg;
  bool want_phi = false;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Fixed point and diagnostics at an allocation");
  add_common(evaluate_cmd);
  evaluate_cmd->add_option("--alloc", alloc_arg, "JSON vector, JSON file, or 'proportional'")
      ->required();
  evaluate_cmd->add_flag("--phi", want_phi, "Also evaluate the surrogate phi");

  OuterOptions outer;
  bool no_line_search = false;
  auto add_outer = [&](CLI::App* sub) {
    sub->add_option("--max-iters", outer.max_iters, "Frank-Wolfe iteration limit")
        ->capture_default_str();
    sub->add_option("--gap-tol", outer.gap_tol, "Relative Frank-Wolfe gap tolerance")
        ->capture_default_str();
    sub->add_flag("--no-line-search", no_line_search, "Use step 2/(k+2)");
  };
  auto* solve_cmd = app.add_subcommand("solve", "Maximize phi over the capacity polytope");
  add_common(solve_cmd);
  add_outer(solve_cmd);

  double budget = 1.0;
  auto* reconfig_cmd =
      app.add_subcommand("solve-reconfig", "Choose which unit-capacity physicals to switch on");
  add_common(reconfig_cmd);
  add_outer(reconfig_cmd);
  reconfig_cmd->add_option("--budget", budget, "Number of physicals to switch on")->required();

  SimConfig sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Event-driven simulation at integer capacities");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--alloc", alloc_arg, "JSON vector, JSON file, or 'proportional'")
      ->required();
  simulate_cmd->add_option("--seed", sim.seed)->capture_default_str();
  simulate_cmd->add_option("--horizon", sim.horizon)->capture_default_str();
  simulate_cmd->add_option("--warmup", sim.warmup)->capture_default_str();
  simulate_cmd->add_option("--batches", sim.batches)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    outer.threads = threads_from_env();
    outer.line_search = !no_line_search;
    const auto in = load(common);
    const auto& model = in.model;
    std::string csv;
    bool converged = true;
    json report;

    if (validate_cmd->parsed()) {
      report = base_report("validate", common, in);
      report["valid"] = true;
    } else if (evaluate_cmd->parsed()) {
      report = base_report("evaluate", common, in);
      std::string source;
      const auto alloc = parse_allocation(model, alloc_arg, source);
      report["options"] = {{"alloc", source}, {"phi", want_phi}};
      converged = evaluate_into(report, model, alloc, csv);
      if (want_phi) converged = phi_into(report, model, alloc, outer.inner) && converged;
    } else if (solve_cmd->parsed()) {
      report = base_report("solve", common, in);
      report["options"] = {{"max_iters", outer.max_iters},
                           {"gap_tol", outer.gap_tol},
                           {"line_search", outer.line_search}};
      const auto trace = maximize_phi(model, outer);
      converged = evaluate_into(report, model, trace.C, csv);
      report["scalars"]["phi"] = trace.phi;
      report["scalars"]["phi_minus_Q"] = trace.phi - report["scalars"]["Q"].get<double>();
      report["scalars"]["fw_gap"] = trace.gap;
      report["solver"] = {{"status", to_string(trace.status)},
                          {"iterations", trace.iterations},
                          {"inner_converged", trace.inner_converged},
                          {"gap_certificate", trace.gap},
                          {"trace", steps_json(trace)}};
      converged = converged && trace.status == SolveStatus::converged && trace.inner_converged;
    } else if (reconfig_cmd->parsed()) {
      report = base_report("solve-reconfig", common, in);
      report["options"] = {{"max_iters", outer.max_iters},
                           {"gap_tol", outer.gap_tol},
                           {"line_search", outer.line_search},
                           {"budget", budget}};
      const auto result = solve_reconfig({model, budget}, outer);
      const auto chosen = model.with_physical_capacities(result.C_phys);
      converged = evaluate_into(report, chosen, result.C, csv);
      json selected = json::array();
      for (std::size_t k = 0; k < model.physical_count(); ++k) {
        if (result.C_phys[k] == 1.0) selected.push_back(model.physicals()[k].id);
      }
      report["reconfig"] = {{"C_phys", vector_json(result.C_phys)},
                            {"selected", selected},
                            {"relaxed_C", vector_json(result.relaxed.C.values)},
                            {"relaxed_C_phys", vector_json(result.relaxed_C_phys)},
                            {"phi_before_rounding", result.phi_before_rounding},
                            {"phi_after_rounding", result.phi_after_rounding},
                            {"relaxed_status", to_string(result.relaxed.status)},
                            {"relaxed_trace", steps_json(result.relaxed)}};
      report["scalars"]["phi"] = result.phi_after_rounding;
      report["scalars"]["fw_gap"] = result.rounded.gap;
      report["solver"] = {{"status", to_string(result.rounded.status)},
                          {"iterations", result.rounded.iterations},
                          {"inner_converged", result.rounded.inner_converged},
                          {"gap_certificate", result.rounded.gap},
                          {"trace", steps_json(result.rounded)}};
      converged = converged && result.relaxed.status == SolveStatus::converged &&
                  result.rounded.status == SolveStatus::converged;
    } else if (simulate_cmd->parsed()) {
      report = base_report("simulate", common, in);
      std::string source;
      auto alloc = parse_allocation(model, alloc_arg, source);
      if (alloc_arg == "proportional") {
        for (auto& v : alloc.values) v = std::floor(v);
        source = "proportional (heuristic, floored)";
      }
      report["options"] = {{"alloc", source},
                           {"seed", sim.seed},
                           {"horizon", sim.horizon},
                           {"warmup", sim.warmup},
                           {"batches", sim.batches}};
      const auto result = simulate(model, alloc, sim);
      converged = evaluate_into(report, model, alloc, csv);
      json flows = json::array();
      for (std::size_t r = 0; r < model.flow_count(); ++r) {
        flows.push_back({{"id", model.flows()[r].id},
                         {"carried", result.carried_per_flow[r].mean},
                         {"carried_stderr", result.carried_per_flow[r].stderr_},
                         {"blocking", result.blocking_per_flow[r].mean},
                         {"blocking_stderr", result.blocking_per_flow[r].stderr_},
                         {"arrivals", result.arrivals[r]},
                         {"admitted", result.admitted[r]},
                         {"blocked", result.blocked[r]}});
      }
      report["simulation"] = {{"generator", result.generator},
                              {"events", result.events},
                              {"flows", flows}};
    }

    emit(common, report, csv);
    return converged ? 0 : kExitNonConvergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}
