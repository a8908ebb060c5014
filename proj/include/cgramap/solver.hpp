//===-- solver.hpp - embedded CDCL SAT core and model decoding ------------===//
//
// Conflict-driven clause learning with two-watched-literal propagation,
// first-UIP learning, activity-based decisions (decaying bumps, deterministic
// index tie-break), phase saving and Luby restarts. Decision order starts
// from variable 1 upward, which build_vars allocates in (node, cycle) order,
// so runs are reproducible. An optional wall-clock budget turns long solves
// into a distinct timeout status: the caller must be able to tell "proven
// infeasible" from "budget exhausted".
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_SOLVER_HPP
#define CGRAMAP_SOLVER_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgramap/encode.hpp"
#include "cgramap/mapping.hpp"

namespace cgramap {

enum class SolveStatus { sat, unsat, timeout };

inline const char *to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::sat:
    return "sat";
  case SolveStatus::unsat:
    return "unsat";
  case SolveStatus::timeout:
    return "timeout";
  }
  return "?";
}

struct SolveStats {
  std::int64_t decisions = 0;
  std::int64_t conflicts = 0;
  std::int64_t propagations = 0;
  double seconds = 0.0;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::unsat;
  std::vector<bool> model; // 1-based; present iff status == sat
  SolveStats stats;
};

/// Evaluates every clause under a complete 1-based assignment.
inline bool model_satisfies(const CnfProblem &problem,
                            const std::vector<bool> &model) {
  for (const Clause &c : problem.clauses) {
    bool ok = false;
    for (int lit : c.lits) {
      const int v = std::abs(lit);
      if (v < static_cast<int>(model.size()) && model[v] == (lit > 0)) {
        ok = true;
        break;
      }
    }
    if (!ok)
      return false;
  }
  return true;
}

class CdclSolver {
public:
  explicit CdclSolver(const CnfProblem &problem)
      : num_vars_(problem.num_vars) {
    assign_.assign(num_vars_ + 1, 0);
    level_.assign(num_vars_ + 1, 0);
    reason_.assign(num_vars_ + 1, -1);
    activity_.assign(num_vars_ + 1, 0.0);
    phase_.assign(num_vars_ + 1, false); // default polarity: false
    heap_pos_.assign(num_vars_ + 1, -1);
    watches_.assign(2 * (num_vars_ + 1), {});
    seen_.assign(num_vars_ + 1, 0);
    for (int v = num_vars_; v >= 1; --v)
      heap_insert(v);
    ok_ = true;
    for (const Clause &c : problem.clauses)
      if (!add_clause(c.lits)) {
        ok_ = false;
        break;
      }
  }

  SolveOutcome solve(std::optional<double> budget_seconds) {
    const auto start = std::chrono::steady_clock::now();
    SolveOutcome out;
    auto finish = [&](SolveStatus st) {
      out.status = st;
      out.stats = stats_;
      out.stats.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
      return out;
    };
    if (!ok_)
      return finish(SolveStatus::unsat);
    if (propagate() != -1)
      return finish(SolveStatus::unsat);

    int restart_count = 0;
    std::int64_t conflicts_until_restart = luby(++restart_count) * 128;
    std::int64_t steps_until_poll = 0;
    while (true) {
      // Poll the clock on a short fixed cadence so an expired budget is
      // noticed within one poll interval regardless of conflict rate.
      if (budget_seconds && --steps_until_poll <= 0) {
        steps_until_poll = 128;
        if (std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count() > *budget_seconds)
          return finish(SolveStatus::timeout);
      }

      const int confl = propagate();
      if (confl != -1) {
        ++stats_.conflicts;
        if (decision_level() == 0)
          return finish(SolveStatus::unsat);
        std::vector<int> learnt;
        int back_level = 0;
        analyze(confl, learnt, back_level);
        backtrack(back_level);
        attach_learnt(learnt);
        decay_activity();
        if (--conflicts_until_restart <= 0) {
          conflicts_until_restart = luby(++restart_count) * 128;
          backtrack(0);
        }
        continue;
      }
      const int v = pick_branch_var();
      if (v == 0) {
        out.model.assign(num_vars_ + 1, false);
        for (int u = 1; u <= num_vars_; ++u)
          out.model[u] = assign_[u] > 0;
        return finish(SolveStatus::sat);
      }
      ++stats_.decisions;
      trail_lim_.push_back(static_cast<int>(trail_.size()));
      enqueue(phase_[v] ? lit_of(v, true) : lit_of(v, false), -1);
    }
  }

private:
  // Literal encoding: 2*v for positive, 2*v+1 for negative.
  static int lit_of(int var, bool positive) {
    return 2 * var + (positive ? 0 : 1);
  }
  static int var_of(int lit) { return lit >> 1; }
  static bool sign_of(int lit) { return (lit & 1) == 0; }
  static int negate(int lit) { return lit ^ 1; }

  int lit_value(int lit) const { // +1 true, -1 false, 0 unassigned
    const int a = assign_[var_of(lit)];
    return sign_of(lit) ? a : -a;
  }

  bool add_clause(const std::vector<int> &signed_lits) {
    std::vector<int> lits;
    for (int sl : signed_lits)
      lits.push_back(lit_of(std::abs(sl), sl > 0));
    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    for (size_t i = 0; i + 1 < lits.size(); ++i)
      if (var_of(lits[i]) == var_of(lits[i + 1]))
        return true; // tautology
    if (lits.empty())
      return false;
    if (lits.size() == 1)
      return enqueue(lits[0], -1);
    attach(lits);
    return true;
  }

  void attach(std::vector<int> lits) {
    const int id = static_cast<int>(clauses_.size());
    watches_[lits[0]].push_back(id);
    watches_[lits[1]].push_back(id);
    clauses_.push_back(std::move(lits));
  }

  void attach_learnt(std::vector<int> &learnt) {
    if (learnt.size() == 1) {
      enqueue(learnt[0], -1);
      return;
    }
    // learnt[0] is the asserting literal; learnt[1] has the backtrack level.
    const int id = static_cast<int>(clauses_.size());
    watches_[learnt[0]].push_back(id);
    watches_[learnt[1]].push_back(id);
    clauses_.push_back(learnt);
    enqueue(learnt[0], id);
  }

  bool enqueue(int lit, int reason) {
    if (lit_value(lit) != 0)
      return lit_value(lit) > 0;
    assign_[var_of(lit)] = sign_of(lit) ? 1 : -1;
    level_[var_of(lit)] = decision_level();
    reason_[var_of(lit)] = reason;
    trail_.push_back(lit);
    return true;
  }

  int decision_level() const { return static_cast<int>(trail_lim_.size()); }

  /// Two-watched-literal unit propagation; returns a conflicting clause id
  /// or -1.
  int propagate() {
    while (prop_head_ < trail_.size()) {
      const int lit = trail_[prop_head_++];
      ++stats_.propagations;
      const int falsified = negate(lit);
      std::vector<int> &watch = watches_[falsified];
      size_t keep = 0;
      for (size_t i = 0; i < watch.size(); ++i) {
        const int id = watch[i];
        std::vector<int> &c = clauses_[id];
        if (c[0] == falsified)
          std::swap(c[0], c[1]);
        // c[1] == falsified now.
        if (lit_value(c[0]) > 0) {
          watch[keep++] = id;
          continue;
        }
        bool moved = false;
        for (size_t k = 2; k < c.size(); ++k) {
          if (lit_value(c[k]) >= 0) {
            std::swap(c[1], c[k]);
            watches_[c[1]].push_back(id);
            moved = true;
            break;
          }
        }
        if (moved)
          continue;
        watch[keep++] = id;
        if (lit_value(c[0]) < 0) {
          // Conflict: keep remaining watches, report.
          for (size_t k = i + 1; k < watch.size(); ++k)
            watch[keep++] = watch[k];
          watch.resize(keep);
          prop_head_ = trail_.size();
          return id;
        }
        enqueue(c[0], id);
      }
      watch.resize(keep);
    }
    return -1;
  }

  /// First-UIP conflict analysis producing an asserting clause.
  void analyze(int confl, std::vector<int> &learnt, int &back_level) {
    learnt.clear();
    learnt.push_back(0); // slot for the asserting literal
    int counter = 0;
    int lit = -1;
    size_t index = trail_.size();
    int clause_id = confl;
    std::vector<int> to_clear;
    do {
      const std::vector<int> &c = clauses_[clause_id];
      const size_t start = (lit == -1) ? 0 : 1;
      for (size_t k = start; k < c.size(); ++k) {
        const int q = c[k];
        const int v = var_of(q);
        if (seen_[v] || level_[v] == 0)
          continue;
        seen_[v] = 1;
        to_clear.push_back(v);
        bump_activity(v);
        if (level_[v] == decision_level())
          ++counter;
        else
          learnt.push_back(q);
      }
      // Walk back to the most recent seen literal on the trail.
      while (!seen_[var_of(trail_[--index])])
        ;
      lit = trail_[index];
      seen_[var_of(lit)] = 0;
      clause_id = reason_[var_of(lit)];
      --counter;
    } while (counter > 0);
    learnt[0] = negate(lit);

    // Backtrack level: second-highest decision level in the clause.
    back_level = 0;
    size_t second = 1;
    for (size_t k = 1; k < learnt.size(); ++k)
      if (level_[var_of(learnt[k])] > back_level) {
        back_level = level_[var_of(learnt[k])];
        second = k;
      }
    if (learnt.size() > 1)
      std::swap(learnt[1], learnt[second]);
    for (int v : to_clear)
      seen_[v] = 0;
  }

  void backtrack(int target_level) {
    if (decision_level() <= target_level)
      return;
    const int trail_mark = trail_lim_[target_level];
    for (int i = static_cast<int>(trail_.size()) - 1; i >= trail_mark; --i) {
      const int v = var_of(trail_[i]);
      phase_[v] = assign_[v] > 0;
      assign_[v] = 0;
      reason_[v] = -1;
      if (heap_pos_[v] < 0)
        heap_insert(v);
    }
    trail_.resize(trail_mark);
    trail_lim_.resize(target_level);
    prop_head_ = trail_.size();
  }

  int pick_branch_var() {
    while (!heap_.empty()) {
      const int v = heap_[0];
      heap_remove_top();
      if (assign_[v] == 0)
        return v;
    }
    return 0;
  }

  // --- activity (VSIDS) with an index-ordered binary heap ------------------

  void bump_activity(int v) {
    activity_[v] += activity_inc_;
    if (activity_[v] > 1e100)
      rescale_activity();
    if (heap_pos_[v] >= 0)
      heap_up(heap_pos_[v]);
  }

  void decay_activity() { activity_inc_ /= 0.95; }

  void rescale_activity() {
    for (int v = 1; v <= num_vars_; ++v)
      activity_[v] *= 1e-100;
    activity_inc_ *= 1e-100;
  }

  bool heap_less(int a, int b) const {
    if (activity_[a] != activity_[b])
      return activity_[a] > activity_[b];
    return a < b; // deterministic tie-break
  }

  void heap_insert(int v) {
    heap_pos_[v] = static_cast<int>(heap_.size());
    heap_.push_back(v);
    heap_up(heap_pos_[v]);
  }

  void heap_remove_top() {
    const int last = heap_.back();
    heap_pos_[heap_[0]] = -1;
    heap_.pop_back();
    if (!heap_.empty()) {
      heap_[0] = last;
      heap_pos_[last] = 0;
      heap_down(0);
    }
  }

  void heap_up(int i) {
    const int v = heap_[i];
    while (i > 0) {
      const int parent = (i - 1) / 2;
      if (!heap_less(v, heap_[parent]))
        break;
      heap_[i] = heap_[parent];
      heap_pos_[heap_[i]] = i;
      i = parent;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }

  void heap_down(int i) {
    const int v = heap_[i];
    const int n = static_cast<int>(heap_.size());
    while (true) {
      int child = 2 * i + 1;
      if (child >= n)
        break;
      if (child + 1 < n && heap_less(heap_[child + 1], heap_[child]))
        ++child;
      if (!heap_less(heap_[child], v))
        break;
      heap_[i] = heap_[child];
      heap_pos_[heap_[i]] = i;
      i = child;
    }
    heap_[i] = v;
    heap_pos_[v] = i;
  }

  static std::int64_t luby(int i) {
    // Luby sequence: 1 1 2 1 1 2 4 ...
    int k = 1;
    while ((1 << (k + 1)) <= i + 1)
      ++k;
    while ((1 << k) - 1 != i) {
      i -= (1 << (k - 1));
      k = 1;
      while ((1 << (k + 1)) <= i + 1)
        ++k;
    }
    return std::int64_t{1} << (k - 1);
  }

  int num_vars_ = 0;
  bool ok_ = true;
  std::vector<std::vector<int>> clauses_;
  std::vector<std::vector<int>> watches_;
  std::vector<int> assign_;
  std::vector<int> level_;
  std::vector<int> reason_;
  std::vector<int> trail_;
  std::vector<int> trail_lim_;
  size_t prop_head_ = 0;
  std::vector<double> activity_;
  double activity_inc_ = 1.0;
  std::vector<bool> phase_;
  std::vector<int> heap_;
  std::vector<int> heap_pos_;
  std::vector<char> seen_;
  SolveStats stats_;
};

/// Decides a problem, optionally under a wall-clock budget. A sat outcome is
/// self-checked against every clause before it is returned.
inline SolveOutcome solve(const CnfProblem &problem,
                          std::optional<double> budget_seconds = std::nullopt) {
  CdclSolver solver(problem);
  SolveOutcome out = solver.solve(budget_seconds);
  if (out.status == SolveStatus::sat && !model_satisfies(problem, out.model))
    throw std::logic_error("solver returned a model violating a clause");
  return out;
}

/// Reads the unique true placement variable per node out of a model.
inline Mapping decode(const std::vector<bool> &model, const VarTable &vt,
                      int ii) {
  std::map<NodeId, Placement> chosen;
  for (int i = 1; i <= vt.placement_count(); ++i) {
    if (i >= static_cast<int>(model.size()) || !model[i])
      continue;
    const PlacementVar &v = vt.var(i);
    if (chosen.count(v.node))
      throw std::logic_error("model places node " + std::to_string(v.node) +
                             " more than once");
    chosen[v.node] = {v.node, v.pe, v.cycle, v.iter};
  }
  Mapping m;
  m.ii = ii;
  std::set<NodeId> all_nodes;
  for (int i = 1; i <= vt.placement_count(); ++i)
    all_nodes.insert(vt.var(i).node);
  for (NodeId n : all_nodes) {
    auto it = chosen.find(n);
    if (it == chosen.end())
      throw std::logic_error("model leaves node " + std::to_string(n) +
                             " unplaced");
    m.placements.push_back(it->second);
  }
  m.sort_canonical();
  return m;
}

/// Parses a DIMACS-style model ("v 1 -2 3 0" lines, or bare signed integers,
/// optionally preceded by an "s SATISFIABLE" line). Requires a value for all
/// variables, rejects indices out of range, and rejects assignments that
/// violate any clause.
inline Mapping import_external_model(std::istream &in,
                                     const CnfProblem &problem,
                                     const VarTable &vt, int ii) {
  std::vector<int> value(problem.num_vars + 1, 0);
  std::string token;
  while (in >> token) {
    if (token == "v" || token == "s" || token == "c") {
      if (token == "s") {
        std::string verdict;
        in >> verdict;
        if (verdict == "UNSATISFIABLE")
          throw ParseError("model file reports UNSATISFIABLE");
      } else if (token == "c") {
        std::string line;
        std::getline(in, line);
      }
      continue;
    }
    int lit = 0;
    try {
      lit = std::stoi(token);
    } catch (const std::exception &) {
      throw ParseError("unexpected token \"" + token + "\" in model file");
    }
    if (lit == 0)
      continue;
    const int v = std::abs(lit);
    if (v > problem.num_vars)
      throw ParseError("model references variable " + std::to_string(v) +
                       " beyond the problem's " +
                       std::to_string(problem.num_vars));
    value[v] = lit > 0 ? 1 : -1;
  }
  std::vector<bool> model(problem.num_vars + 1, false);
  for (int v = 1; v <= problem.num_vars; ++v) {
    if (value[v] == 0)
      throw ParseError("model leaves variable " + std::to_string(v) +
                       " unassigned");
    model[v] = value[v] > 0;
  }
  if (!model_satisfies(problem, model))
    throw ValidationError("external model violates a clause");
  return decode(model, vt, ii);
}

} // namespace cgramap

#endif // CGRAMAP_SOLVER_HPP
