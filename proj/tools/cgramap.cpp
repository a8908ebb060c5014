//===-- cgramap.cpp - command-line driver ---------------------------------===//
//
// Subcommands: map, schedule, encode, validate, oracle, metrics.
// Exit codes: 0 success, 1 domain failure (unsat / exhausted / violations),
// 2 usage or I/O error, 3 waiting for an external solver model (map with
// --solver dimacs-file exchanges CNF and model files instead of running the
// embedded solver).
//
//===----------------------------------------------------------------------===//

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cgramap/driver.hpp"
#include "cgramap/verify.hpp"

namespace {

using namespace cgramap;

std::ifstream open_input(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  return out;
}

DataflowGraph read_dfg(const std::string &path) {
  auto in = open_input(path);
  return load_dfg(in);
}

CgraSpec read_arch(const std::string &path,
                   const std::optional<std::string> &topology_override) {
  auto in = open_input(path);
  CgraSpec spec = load_arch(in);
  if (topology_override) {
    if (*topology_override == "mesh")
      spec.topology = Topology::mesh;
    else if (*topology_override == "torus")
      spec.topology = Topology::torus;
    else
      throw std::runtime_error("unknown topology " + *topology_override);
  }
  return spec;
}

void write_json_or_stdout(const nlohmann::json &j,
                          const std::optional<std::string> &path) {
  if (path) {
    auto out = open_output(*path);
    out << j.dump(2) << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
}

struct MapOptions {
  std::string dfg_path;
  std::string arch_path;
  std::optional<std::string> topology;
  std::optional<std::string> out_path;
  SearchConfig cfg;
  std::string solver = "embedded";
  std::string exchange_dir = ".";
  bool print_stages = false;
};

int finish_mapping(const DataflowGraph &g, const CgraSpec &spec,
                   const Mapping &mapping, const MiiReport &mii,
                   const MapOptions &opt) {
  MappingMetrics metrics{utilization(mapping, spec), mii.mii};
  write_json_or_stdout(mapping_to_json(mapping, metrics), opt.out_path);
  if (opt.print_stages) {
    const LevelSchedule a = asap(g);
    const auto kms =
        build_kms(mobility(a, alap(g, a.length())), mapping.ii);
    std::cerr << format_stages(expand_stages(mapping, kms));
  }
  return 0;
}

/// Embedded-solver mapping: the driver loop end to end.
int run_map_embedded(const MapOptions &opt) {
  const DataflowGraph g = read_dfg(opt.dfg_path);
  const CgraSpec spec = read_arch(opt.arch_path, opt.topology);
  const MapResult result = map_loop(g, spec, opt.cfg, &std::cerr);
  switch (result.outcome) {
  case MapResult::mapped:
    return finish_mapping(g, spec, *result.mapping, result.mii, opt);
  case MapResult::exhausted_ii:
    std::cerr << "no mapping up to II=" << opt.cfg.max_ii << "\n";
    return 1;
  case MapResult::timed_out:
    std::cerr << "global budget exhausted\n";
    return 1;
  }
  return 1;
}

/// File-exchange mapping: per II, read <dir>/ii<k>.model if present, else
/// write <dir>/ii<k>.cnf and <dir>/ii<k>.map and stop with exit code 3. A
/// model file whose first line is "UNSAT" (or an "s UNSATISFIABLE" header)
/// advances to the next II.
int run_map_dimacs_file(const MapOptions &opt) {
  namespace fs = std::filesystem;
  const DataflowGraph g = read_dfg(opt.dfg_path);
  const CgraSpec spec = read_arch(opt.arch_path, opt.topology);
  const MiiReport mii = compute_mii(g, spec);
  for (int ii = mii.mii; ii <= opt.cfg.max_ii; ++ii) {
    EncodeResult enc = build_problem(g, spec, ii);
    if (enc.unroutable) {
      std::cerr << "II=" << ii << " status=unsat time=0 vars="
                << enc.vars.total_count() << " clauses=0\n";
      continue;
    }
    const fs::path base = fs::path(opt.exchange_dir) /
                          ("ii" + std::to_string(ii));
    const fs::path model_path = base.string() + ".model";
    if (!fs::exists(model_path)) {
      auto cnf = open_output(base.string() + ".cnf");
      write_dimacs(enc.problem, cnf);
      auto litmap = open_output(base.string() + ".map");
      write_literal_map(enc.vars, litmap);
      std::cerr << "wrote " << base.string() << ".cnf and " << base.string()
                << ".map; run a DIMACS solver and save its model as "
                << model_path.string() << " (or the single word UNSAT), "
                << "then rerun\n";
      return 3;
    }
    auto model_in = open_input(model_path.string());
    std::string first_word;
    model_in >> first_word;
    if (first_word == "UNSAT" ||
        (first_word == "s" && [&] {
          std::string verdict;
          model_in >> verdict;
          return verdict == "UNSATISFIABLE";
        }())) {
      std::cerr << "II=" << ii << " status=unsat (external)\n";
      continue;
    }
    model_in.clear();
    model_in.seekg(0);
    Mapping mapping = import_external_model(model_in, enc.problem, enc.vars,
                                            ii);
    if (const auto failure = allocate_registers(g, spec, mapping)) {
      std::cerr << "II=" << ii << " status=ra_fail (pe " << failure->pe
                << ", " << failure->demand << " live values)\n";
      continue;
    }
    std::cerr << "II=" << ii << " status=sat (external)\n";
    return finish_mapping(g, spec, mapping, mii, opt);
  }
  std::cerr << "no mapping up to II=" << opt.cfg.max_ii << "\n";
  return 1;
}

int run_schedule(const std::string &dfg_path,
                 const std::optional<std::string> &arch_path,
                 const std::optional<std::string> &topology,
                 std::optional<int> ii_flag) {
  const DataflowGraph g = read_dfg(dfg_path);
  const LevelSchedule asap_sched = asap(g);
  const LevelSchedule alap_sched = alap(g, asap_sched.length());
  const MobilitySchedule ms = mobility(asap_sched, alap_sched);
  std::cout << format_level_schedule(asap_sched, "ASAP");
  std::cout << format_level_schedule(alap_sched, "ALAP");
  std::cout << format_level_schedule(ms, "MS");
  std::optional<MiiReport> mii;
  if (arch_path) {
    const CgraSpec spec = read_arch(*arch_path, topology);
    mii = compute_mii(g, spec);
    std::cout << "MII res=" << mii->res_ii << " rec=" << mii->rec_ii
              << " mii=" << mii->mii << "\n";
  }
  int ii = 0;
  if (ii_flag)
    ii = *ii_flag;
  else if (mii)
    ii = mii->mii;
  else
    throw std::runtime_error("schedule needs --ii or --arch to pick the II");
  std::cout << format_kms(build_kms(ms, ii));
  return 0;
}

int run_encode(const std::string &dfg_path, const std::string &arch_path,
               const std::optional<std::string> &topology, int ii,
               const std::string &dimacs_path,
               std::optional<std::string> litmap_path) {
  const DataflowGraph g = read_dfg(dfg_path);
  const CgraSpec spec = read_arch(arch_path, topology);
  EncodeResult enc = build_problem(g, spec, ii);
  if (enc.unroutable) {
    std::cerr << "unroutable edge " << enc.unroutable->src << "->"
              << enc.unroutable->dst << " distance "
              << enc.unroutable->distance << " at II=" << ii << "\n";
    return 1;
  }
  auto cnf = open_output(dimacs_path);
  write_dimacs(enc.problem, cnf);
  auto litmap = open_output(litmap_path ? *litmap_path : dimacs_path + ".map");
  write_literal_map(enc.vars, litmap);
  std::cerr << "vars=" << enc.vars.total_count()
            << " clauses=" << enc.problem.clauses.size() << "\n";
  return 0;
}

int run_validate(const std::string &dfg_path, const std::string &arch_path,
                 const std::optional<std::string> &topology,
                 const std::string &mapping_path) {
  const DataflowGraph g = read_dfg(dfg_path);
  const CgraSpec spec = read_arch(arch_path, topology);
  auto in = open_input(mapping_path);
  const Mapping m = load_mapping(in);
  const auto violations = validate(g, spec, m);
  if (violations.empty()) {
    std::cout << "ok\n";
    return 0;
  }
  for (const Violation &v : violations)
    std::cout << to_string(v.kind) << ": " << v.detail << "\n";
  return 1;
}

int run_oracle(const std::string &dfg_path, const std::string &arch_path,
               const std::optional<std::string> &topology, int max_ii,
               bool allow_large, const std::optional<std::string> &out_path) {
  const DataflowGraph g = read_dfg(dfg_path);
  const CgraSpec spec = read_arch(arch_path, topology);
  OracleLimits limits;
  limits.allow_large = allow_large;
  const auto found = brute_force_min_ii(g, spec, max_ii, limits);
  if (!found) {
    std::cerr << "no mapping up to II=" << max_ii << "\n";
    return 1;
  }
  const MiiReport mii = compute_mii(g, spec);
  MappingMetrics metrics{utilization(*found, spec), mii.mii};
  write_json_or_stdout(mapping_to_json(*found, metrics), out_path);
  return 0;
}

int run_metrics(const std::string &dfg_path, const std::string &arch_path,
                const std::optional<std::string> &topology,
                const std::string &mapping_path) {
  const DataflowGraph g = read_dfg(dfg_path);
  const CgraSpec spec = read_arch(arch_path, topology);
  auto in = open_input(mapping_path);
  const Mapping m = load_mapping(in);
  const MiiReport mii = compute_mii(g, spec);
  nlohmann::json j = {{"ii", m.ii},
                      {"nodes", m.placements.size()},
                      {"mii", mii.mii},
                      {"res_ii", mii.res_ii},
                      {"rec_ii", mii.rec_ii},
                      {"utilization", utilization(m, spec)}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"SAT-based modulo-scheduling mapper for time-multiplexed "
               "CGRAs"};
  app.require_subcommand(1);

  // map
  MapOptions map_opt;
  double per_ii_timeout = 0.0, global_timeout = 4000.0;
  auto *map_cmd = app.add_subcommand("map", "search for a minimal-II mapping");
  map_cmd->add_option("--dfg", map_opt.dfg_path, "dataflow graph JSON")
      ->required();
  map_cmd->add_option("--arch", map_opt.arch_path, "architecture JSON")
      ->required();
  map_cmd->add_option("--out", map_opt.out_path, "mapping JSON output path");
  map_cmd->add_option("--max-ii", map_opt.cfg.max_ii, "search cutoff")
      ->capture_default_str();
  auto *per_ii_opt = map_cmd->add_option("--per-ii-timeout", per_ii_timeout,
                                         "seconds per II attempt");
  map_cmd->add_option("--timeout", global_timeout, "global budget in seconds")
      ->capture_default_str();
  std::string map_topology;
  auto *map_topo_opt = map_cmd->add_option(
      "--topology", map_topology, "override the architecture topology");
  map_cmd->add_option("--solver", map_opt.solver, "embedded or dimacs-file")
      ->check(CLI::IsMember({"embedded", "dimacs-file"}))
      ->capture_default_str();
  map_cmd->add_option("--exchange-dir", map_opt.exchange_dir,
                      "directory for dimacs-file exchange")
      ->capture_default_str();
  map_cmd->add_flag("--print-stages", map_opt.print_stages,
                    "print the prologue/kernel/epilogue expansion to stderr");

  // schedule
  std::string sched_dfg;
  std::optional<std::string> sched_arch;
  std::string sched_topology;
  int sched_ii = 0;
  auto *sched_cmd =
      app.add_subcommand("schedule", "print ASAP/ALAP/MS tables and the KMS");
  sched_cmd->add_option("--dfg", sched_dfg, "dataflow graph JSON")->required();
  sched_cmd->add_option("--arch", sched_arch, "architecture JSON");
  auto *sched_topo_opt =
      sched_cmd->add_option("--topology", sched_topology, "topology override");
  auto *sched_ii_opt =
      sched_cmd->add_option("--ii", sched_ii, "initiation interval for the KMS");

  // encode
  std::string enc_dfg, enc_arch, enc_dimacs;
  std::string enc_topology;
  std::optional<std::string> enc_litmap;
  int enc_ii = 0;
  auto *enc_cmd = app.add_subcommand("encode", "emit DIMACS CNF + literal map");
  enc_cmd->add_option("--dfg", enc_dfg, "dataflow graph JSON")->required();
  enc_cmd->add_option("--arch", enc_arch, "architecture JSON")->required();
  enc_cmd->add_option("--ii", enc_ii, "initiation interval")->required();
  enc_cmd->add_option("--dimacs", enc_dimacs, "CNF output path")->required();
  enc_cmd->add_option("--litmap", enc_litmap,
                      "literal map output path (default <dimacs>.map)");
  auto *enc_topo_opt =
      enc_cmd->add_option("--topology", enc_topology, "topology override");

  // validate
  std::string val_dfg, val_arch, val_mapping;
  std::string val_topology;
  auto *val_cmd = app.add_subcommand("validate", "check a mapping's legality");
  val_cmd->add_option("--dfg", val_dfg, "dataflow graph JSON")->required();
  val_cmd->add_option("--arch", val_arch, "architecture JSON")->required();
  val_cmd->add_option("--mapping", val_mapping, "mapping JSON")->required();
  auto *val_topo_opt =
      val_cmd->add_option("--topology", val_topology, "topology override");

  // oracle
  std::string ora_dfg, ora_arch;
  std::string ora_topology;
  std::optional<std::string> ora_out;
  int ora_max_ii = 50;
  bool ora_allow_large = false;
  auto *ora_cmd =
      app.add_subcommand("oracle", "exhaustive minimal-II search (small graphs)");
  ora_cmd->add_option("--dfg", ora_dfg, "dataflow graph JSON")->required();
  ora_cmd->add_option("--arch", ora_arch, "architecture JSON")->required();
  ora_cmd->add_option("--max-ii", ora_max_ii, "search cutoff")
      ->capture_default_str();
  ora_cmd->add_flag("--allow-large", ora_allow_large,
                    "disable the node-count guard");
  ora_cmd->add_option("--out", ora_out, "mapping JSON output path");
  auto *ora_topo_opt =
      ora_cmd->add_option("--topology", ora_topology, "topology override");

  // metrics
  std::string met_dfg, met_arch, met_mapping;
  std::string met_topology;
  auto *met_cmd =
      app.add_subcommand("metrics", "utilization and MII for a mapping");
  met_cmd->add_option("--dfg", met_dfg, "dataflow graph JSON")->required();
  met_cmd->add_option("--arch", met_arch, "architecture JSON")->required();
  met_cmd->add_option("--mapping", met_mapping, "mapping JSON")->required();
  auto *met_topo_opt =
      met_cmd->add_option("--topology", met_topology, "topology override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto topo_or_nullopt =
      [](const CLI::Option *opt,
         const std::string &value) -> std::optional<std::string> {
    if (opt->count() == 0)
      return std::nullopt;
    return value;
  };

  try {
    if (map_cmd->parsed()) {
      map_opt.topology = topo_or_nullopt(map_topo_opt, map_topology);
      if (per_ii_opt->count() > 0)
        map_opt.cfg.per_ii_budget = per_ii_timeout;
      map_opt.cfg.global_budget = global_timeout;
      return map_opt.solver == "embedded" ? run_map_embedded(map_opt)
                                          : run_map_dimacs_file(map_opt);
    }
    if (sched_cmd->parsed())
      return run_schedule(sched_dfg, sched_arch,
                          topo_or_nullopt(sched_topo_opt, sched_topology),
                          sched_ii_opt->count() ? std::optional<int>(sched_ii)
                                                : std::nullopt);
    if (enc_cmd->parsed())
      return run_encode(enc_dfg, enc_arch,
                        topo_or_nullopt(enc_topo_opt, enc_topology), enc_ii,
                        enc_dimacs, enc_litmap);
    if (val_cmd->parsed())
      return run_validate(val_dfg, val_arch,
                          topo_or_nullopt(val_topo_opt, val_topology),
                          val_mapping);
    if (ora_cmd->parsed())
      return run_oracle(ora_dfg, ora_arch,
                        topo_or_nullopt(ora_topo_opt, ora_topology),
                        ora_max_ii, ora_allow_large, ora_out);
    if (met_cmd->parsed())
      return run_metrics(met_dfg, met_arch,
                         topo_or_nullopt(met_topo_opt, met_topology),
                         met_mapping);
  } catch (const ParseError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
