// Dense two-phase primal simplex with dual recovery.  Bland's rule is used
// for anti-cycling (the default pricing is most-negative reduced cost with a
// Bland fallback after a degenerate streak).  An exact mode re-runs the same
// pivoting over arbitrary-precision rationals.
#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "coreaudit/model.hpp"

namespace coreaudit {

enum class Relation { Le, Ge, Eq };
enum class Sense { Minimize, Maximize };
enum class LpStatus { Optimal, Infeasible, Unbounded };

constexpr double kLpInf = std::numeric_limits<double>::infinity();

struct LpProblem {
  Sense sense = Sense::Minimize;
  std::vector<double> objective;
  std::vector<double> lower, upper;
  std::vector<std::string> var_label;

  struct Row {
    std::string label;
    std::vector<std::pair<int, double>> terms;  // (variable index, coefficient)
    Relation rel = Relation::Ge;
    double rhs = 0.0;
  };
  std::vector<Row> rows;

  int add_var(std::string label, double obj = 0.0, double lo = 0.0, double hi = kLpInf) {
    var_label.push_back(std::move(label));
    lower.push_back(lo);
    upper.push_back(hi);
    objective.push_back(obj);
    return (int)objective.size() - 1;
  }
  int add_row(std::string label, Relation rel, double rhs,
              std::vector<std::pair<int, double>> terms) {
    rows.push_back({std::move(label), std::move(terms), rel, rhs});
    return (int)rows.size() - 1;
  }
  std::size_t num_vars() const { return objective.size(); }
  std::size_t num_rows() const { return rows.size(); }
  void validate() const;  // throws AuditError("MALFORMED") on bad indices/bounds
};

struct LpOptions {
  bool exact = false;          // solve over exact rationals
  int jobs = 1;                // threads for tableau updates
  long long max_iterations = 0;  // 0 = automatic cap
};

struct LpSolution {
  LpStatus status = LpStatus::Optimal;
  double objective = 0.0;
  double dual_objective = 0.0;
  std::vector<double> primal;        // per variable
  std::vector<double> dual;          // per row: shadow price d(objective)/d(rhs)
  std::vector<double> reduced_cost;  // per variable, in the problem's sense
  long long iterations = 0;
  bool exact = false;
};

// Solves the problem.  Throws AuditError("SOLVER_STALL") when the iteration
// cap is hit or the optimum fails the internal strong-duality check; optimal
// results always carry duals.
LpSolution solve_lp(const LpProblem& p, const LpOptions& options = {});

}  // namespace coreaudit
