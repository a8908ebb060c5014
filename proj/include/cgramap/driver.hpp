//===-- driver.hpp - iterative mapping loop, metrics, stage expansion -----===//
//
// II search from the lower bound upward: encode, solve, register-allocate.
// UNSAT, an unroutable edge, a per-II timeout or a coloring failure advance
// to the next II; the first mapping passing both the solver and register
// allocation is returned. Without per-II timeouts the returned II is minimal;
// with them it is an upper bound and the trace records which IIs were left
// unproven. Each II re-encodes from scratch (the KMS changes structurally).
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_DRIVER_HPP
#define CGRAMAP_DRIVER_HPP

#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cgramap/encode.hpp"
#include "cgramap/regalloc.hpp"
#include "cgramap/schedule.hpp"
#include "cgramap/solver.hpp"

namespace cgramap {

struct SearchConfig {
  int max_ii = 50;
  std::optional<double> per_ii_budget;          // seconds per II attempt
  std::optional<double> global_budget = 4000.0; // seconds for the whole search
};

enum class IterationStatus { sat, unsat, timeout, ra_fail };

inline const char *to_string(IterationStatus s) {
  switch (s) {
  case IterationStatus::sat:
    return "sat";
  case IterationStatus::unsat:
    return "unsat";
  case IterationStatus::timeout:
    return "timeout";
  case IterationStatus::ra_fail:
    return "ra_fail";
  }
  return "?";
}

struct IterationRecord {
  int ii = 0;
  IterationStatus status = IterationStatus::unsat;
  double seconds = 0.0;
  int vars = 0;
  std::int64_t clauses = 0;
};

inline std::string format_trace_line(const IterationRecord &r) {
  std::ostringstream os;
  os << "II=" << r.ii << " status=" << to_string(r.status)
     << " time=" << r.seconds << " vars=" << r.vars
     << " clauses=" << r.clauses;
  return os.str();
}

struct MapResult {
  enum Outcome { mapped, exhausted_ii, timed_out } outcome = exhausted_ii;
  std::optional<Mapping> mapping;
  MiiReport mii;
  std::vector<IterationRecord> trace;
};

/// The full search loop of the toolchain. `log`, when given, receives one
/// trace line per II attempt.
inline MapResult map_loop(const DataflowGraph &g, const CgraSpec &spec,
                          const SearchConfig &cfg = {},
                          std::ostream *log = nullptr) {
  MapResult result;
  result.mii = compute_mii(g, spec);
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };
  const auto emit = [&](IterationRecord r) {
    if (log)
      *log << format_trace_line(r) << "\n";
    result.trace.push_back(std::move(r));
  };

  for (int ii = result.mii.mii; ii <= cfg.max_ii; ++ii) {
    if (cfg.global_budget && elapsed() >= *cfg.global_budget) {
      result.outcome = MapResult::timed_out;
      return result;
    }
    const double attempt_start = elapsed();
    EncodeResult enc = build_problem(g, spec, ii);
    IterationRecord record;
    record.ii = ii;
    record.vars = enc.vars.total_count();
    record.clauses = static_cast<std::int64_t>(enc.problem.clauses.size());
    if (enc.unroutable) {
      // An edge with no admissible pairing: unsatisfiable at this II without
      // consulting the solver.
      record.status = IterationStatus::unsat;
      record.seconds = elapsed() - attempt_start;
      emit(std::move(record));
      continue;
    }

    std::optional<double> budget = cfg.per_ii_budget;
    if (cfg.global_budget) {
      const double remaining = *cfg.global_budget - elapsed();
      if (!budget || remaining < *budget)
        budget = remaining;
    }
    SolveOutcome outcome = solve(enc.problem, budget);
    record.seconds = elapsed() - attempt_start;

    if (outcome.status == SolveStatus::timeout) {
      record.status = IterationStatus::timeout;
      emit(std::move(record));
      if (cfg.global_budget && elapsed() >= *cfg.global_budget) {
        result.outcome = MapResult::timed_out;
        return result;
      }
      continue; // budgeted mode: the next II may still be tractable
    }
    if (outcome.status == SolveStatus::unsat) {
      record.status = IterationStatus::unsat;
      emit(std::move(record));
      continue;
    }

    Mapping mapping = decode(outcome.model, enc.vars, ii);
    if (allocate_registers(g, spec, mapping)) {
      record.status = IterationStatus::ra_fail;
      record.seconds = elapsed() - attempt_start;
      emit(std::move(record));
      continue;
    }
    record.status = IterationStatus::sat;
    record.seconds = elapsed() - attempt_start;
    emit(std::move(record));
    result.outcome = MapResult::mapped;
    result.mapping = std::move(mapping);
    return result;
  }
  result.outcome = MapResult::exhausted_ii;
  return result;
}

/// Kernel occupancy: mapped nodes over available PE-slots, in (0, 1].
inline double utilization(const Mapping &m, const CgraSpec &spec) {
  return static_cast<double>(m.placements.size()) /
         (static_cast<double>(m.ii) * spec.pe_count());
}

/// One executed operation in the staged schedule; copy is the pipeline
/// iteration index in 0..K-1.
struct StageEntry {
  NodeId node = 0;
  PeId pe = 0;
  int copy = 0;
};

struct StagedSchedule {
  std::vector<std::vector<StageEntry>> prologue;
  std::vector<std::vector<StageEntry>> kernel; // exactly ii rows
  std::vector<std::vector<StageEntry>> epilogue;

  std::size_t total_operations() const {
    std::size_t n = 0;
    for (const auto *stage : {&prologue, &kernel, &epilogue})
      for (const auto &row : *stage)
        n += row.size();
    return n;
  }
};

/// Unfolds a kernel mapping into the prologue / kernel / epilogue shape of a
/// K-stage pipeline. Flat row r executes, for each copy j in 0..K-1, the
/// nodes whose unfolded schedule time t satisfies r = j*ii + t. Rows
/// [T-ii, T) are the steady state and reproduce the kernel cycles 0..ii-1 in
/// order (virtual negative rows of a shallow pipeline are empty kernel rows).
inline StagedSchedule expand_stages(const Mapping &m,
                                    const KernelMobilitySchedule &kms) {
  const int ii = kms.ii;
  const int K = kms.fold_count;
  const int T = kms.source_rows;
  std::map<int, std::vector<std::pair<NodeId, PeId>>> by_time;
  for (const Placement &p : m.placements)
    by_time[kms.unfold(p.cycle, p.iter)].emplace_back(p.node, p.pe);

  const auto row_at = [&](int r) {
    std::vector<StageEntry> row;
    for (int j = 0; j < K; ++j) {
      const int t = r - j * ii;
      auto it = by_time.find(t);
      if (it == by_time.end())
        continue;
      for (auto [node, pe] : it->second)
        row.push_back({node, pe, j});
    }
    return row;
  };

  StagedSchedule staged;
  for (int r = 0; r < T - ii; ++r)
    staged.prologue.push_back(row_at(r));
  for (int r = T - ii; r < T; ++r)
    staged.kernel.push_back(row_at(r));
  for (int r = T; r < T + (K - 1) * ii; ++r)
    staged.epilogue.push_back(row_at(r));
  return staged;
}

inline std::string format_stages(const StagedSchedule &s) {
  std::ostringstream os;
  const auto dump = [&](const char *name,
                        const std::vector<std::vector<StageEntry>> &rows,
                        int base) {
    os << name << "\n";
    for (size_t i = 0; i < rows.size(); ++i) {
      os << base + static_cast<int>(i) << ":";
      for (const StageEntry &e : rows[i])
        os << " " << e.node << "@pe" << e.pe << "#" << e.copy;
      os << "\n";
    }
  };
  dump("prologue", s.prologue, 0);
  dump("kernel", s.kernel, static_cast<int>(s.prologue.size()));
  dump("epilogue", s.epilogue,
       static_cast<int>(s.prologue.size() + s.kernel.size()));
  return os.str();
}

} // namespace cgramap

#endif // CGRAMAP_DRIVER_HPP
