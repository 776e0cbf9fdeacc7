#include "coreaudit/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <boost/multiprecision/cpp_int.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coreaudit {

void LpProblem::validate() const {
  std::size_t n = num_vars();
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(lower[j]))
      throw AuditError("MALFORMED", "variable " + var_label[j] + " needs a finite lower bound");
    if (upper[j] < lower[j])
      throw AuditError("MALFORMED", "variable " + var_label[j] + " has crossed bounds");
    if (!std::isfinite(objective[j]))
      throw AuditError("MALFORMED", "objective coefficient not finite");
  }
  for (auto& row : rows) {
    if (!std::isfinite(row.rhs))
      throw AuditError("MALFORMED", "row " + row.label + " rhs not finite");
    for (auto& [j, a] : row.terms) {
      if (j < 0 || (std::size_t)j >= n)
        throw AuditError("MALFORMED", "row " + row.label + " references unknown variable");
      if (!std::isfinite(a))
        throw AuditError("MALFORMED", "row " + row.label + " coefficient not finite");
    }
  }
}

namespace {

using Rational = boost::multiprecision::cpp_rational;

template <class T>
double to_double(const T& v) {
  if constexpr (std::is_same_v<T, double>)
    return v;
  else
    return v.template convert_to<double>();
}

template <class T>
class SimplexCore {
 public:
  SimplexCore(const LpProblem& p, const LpOptions& opt) : p_(p), opt_(opt) { build(); }

  LpSolution run() {
    LpSolution out;
    out.exact = !std::is_same_v<T, double>;
    if (nart_ > 0) {
      set_phase1_objective();
      RunResult r1 = iterate(true);
      if (r1 == RunResult::NoPivotRow)
        throw AuditError("SOLVER_STALL", "phase-1 ratio test failed");
      T infeas = -obj_[width_ - 1];
      if (!approx_zero_feas(infeas)) {
        out.status = LpStatus::Infeasible;
        out.iterations = iterations_;
        return out;
      }
      drive_out_artificials();
    }
    set_phase2_objective();
    RunResult r2 = iterate(false);
    out.iterations = iterations_;
    if (r2 == RunResult::NoPivotRow) {
      out.status = LpStatus::Unbounded;
      return out;
    }
    out.status = LpStatus::Optimal;
    extract(out);
    return out;
  }

 private:
  enum class RunResult { Optimal, NoPivotRow };

  const LpProblem& p_;
  const LpOptions& opt_;
  int nstruct_ = 0, nslack_ = 0, nart_ = 0;
  int width_ = 0;  // columns + 1 for rhs
  int rows_ = 0;   // internal rows (original + upper-bound rows)
  std::vector<T> tab_;   // rows_ x width_
  std::vector<T> obj_;   // active objective row
  std::vector<int> basis_;
  std::vector<int> origin_col_;   // per internal row (slack or artificial, coeff +1)
  std::vector<char> negated_;     // per internal row
  std::vector<T> rhs_int_;        // per internal row, post-normalization
  std::vector<T> c_int_;          // internal objective (sense-normalized), structural only
  double sense_sign_ = 1.0;
  long long iterations_ = 0;
  double bmax_ = 1.0;

  T* row(int r) { return tab_.data() + (std::size_t)r * width_; }

  static T from_double(double v) {
    if constexpr (std::is_same_v<T, double>)
      return v;
    else
      return T(v);
  }

  bool approx_zero_feas(const T& v) {
    if constexpr (std::is_same_v<T, double>)
      return std::abs(v) <= 1e-7 * std::max(1.0, bmax_);
    else
      return v == 0;
  }

  void build() {
    p_.validate();
    nstruct_ = (int)p_.num_vars();
    sense_sign_ = p_.sense == Sense::Maximize ? -1.0 : 1.0;
    c_int_.resize(nstruct_);
    for (int j = 0; j < nstruct_; ++j)
      c_int_[j] = from_double(sense_sign_ * p_.objective[j]);

    struct RowSpec {
      std::vector<std::pair<int, T>> terms;
      T rhs;
      int slack_sign;  // 0 none
      bool artificial;
      int orig;  // original row index or -1 for a bound row
    };
    std::vector<RowSpec> specs;
    negated_.clear();
    for (std::size_t r = 0; r < p_.rows.size(); ++r) {
      const auto& src = p_.rows[r];
      RowSpec s;
      s.orig = (int)r;
      s.rhs = from_double(src.rhs);
      for (auto& [j, a] : src.terms) {
        s.rhs -= from_double(a) * from_double(p_.lower[j]);
        s.terms.push_back({j, from_double(a)});
      }
      s.slack_sign = src.rel == Relation::Le ? 1 : src.rel == Relation::Ge ? -1 : 0;
      bool neg = s.rhs < 0 || (s.rhs == 0 && s.slack_sign == -1);
      if (neg) {
        for (auto& [j, a] : s.terms) a = -a;
        s.rhs = -s.rhs;
        s.slack_sign = -s.slack_sign;
      }
      negated_.push_back(neg ? 1 : 0);
      s.artificial = s.slack_sign != 1;
      specs.push_back(std::move(s));
    }
    // Finite upper bounds become internal rows x_j <= hi - lo.
    for (int j = 0; j < nstruct_; ++j) {
      if (p_.upper[j] == kLpInf) continue;
      RowSpec s;
      s.orig = -1 - j;  // remember the variable for dual bookkeeping
      s.terms.push_back({j, from_double(1.0)});
      s.rhs = from_double(p_.upper[j]) - from_double(p_.lower[j]);
      s.slack_sign = 1;
      s.artificial = false;
      negated_.push_back(0);
      specs.push_back(std::move(s));
    }

    rows_ = (int)specs.size();
    nslack_ = 0;
    nart_ = 0;
    for (auto& s : specs) {
      if (s.slack_sign != 0) nslack_++;
      if (s.artificial) nart_++;
    }
    width_ = nstruct_ + nslack_ + nart_ + 1;
    tab_.assign((std::size_t)rows_ * width_, from_double(0.0));
    basis_.assign(rows_, -1);
    origin_col_.assign(rows_, -1);
    rhs_int_.resize(rows_);
    row_orig_.assign(rows_, 0);

    bmax_ = 1.0;
    int next_slack = nstruct_;
    int next_art = nstruct_ + nslack_;
    for (int r = 0; r < rows_; ++r) {
      auto& s = specs[r];
      row_orig_[r] = s.orig;
      T* tr = row(r);
      for (auto& [j, a] : s.terms) tr[j] += a;
      if (s.slack_sign != 0) {
        tr[next_slack] = from_double((double)s.slack_sign);
        if (s.slack_sign == 1 && !s.artificial) {
          basis_[r] = next_slack;
          origin_col_[r] = next_slack;
        }
        next_slack++;
      }
      if (s.artificial) {
        tr[next_art] = from_double(1.0);
        basis_[r] = next_art;
        origin_col_[r] = next_art;
        next_art++;
      }
      tr[width_ - 1] = s.rhs;
      rhs_int_[r] = s.rhs;
      bmax_ = std::max(bmax_, std::abs(to_double(s.rhs)));
    }
    art_begin_ = nstruct_ + nslack_;
  }

  int art_begin_ = 0;
  std::vector<int> row_orig_;

  void set_phase1_objective() {
    obj_.assign(width_, from_double(0.0));
    for (int c = art_begin_; c < width_ - 1; ++c) obj_[c] = from_double(1.0);
    for (int r = 0; r < rows_; ++r) {
      if (basis_[r] >= art_begin_) {
        T* tr = row(r);
        for (int c = 0; c < width_; ++c) obj_[c] -= tr[c];
      }
    }
  }

  void set_phase2_objective() {
    obj_.assign(width_, from_double(0.0));
    for (int j = 0; j < nstruct_; ++j) obj_[j] = c_int_[j];
    for (int r = 0; r < rows_; ++r) {
      int b = basis_[r];
      if (b < nstruct_ && !(c_int_[b] == 0)) {
        T cb = c_int_[b];
        T* tr = row(r);
        for (int c = 0; c < width_; ++c) obj_[c] -= cb * tr[c];
      }
    }
  }

  bool col_negative(const T& v, bool bland) const {
    if constexpr (std::is_same_v<T, double>)
      return v < (bland ? -1e-12 : -1e-9);
    else
      return v < 0;
  }

  bool pivot_positive(const T& v) const {
    if constexpr (std::is_same_v<T, double>)
      return v > 1e-9;
    else
      return v > 0;
  }

  RunResult iterate(bool phase1) {
    long long cap = opt_.max_iterations > 0
                        ? opt_.max_iterations
                        : 20000 + 60LL * (rows_ + width_);
    bool bland = !std::is_same_v<T, double>;
    int degenerate_streak = 0;
    double last_obj = to_double(obj_[width_ - 1]);
    while (true) {
      if (iterations_++ > cap)
        throw AuditError("SOLVER_STALL", "simplex iteration cap exceeded");
      int enter = -1;
      if (bland) {
        for (int c = 0; c < art_begin_; ++c)
          if (col_negative(obj_[c], true)) {
            enter = c;
            break;
          }
      } else {
        T best = from_double(0.0);
        for (int c = 0; c < art_begin_; ++c)
          if (col_negative(obj_[c], false) && obj_[c] < best) {
            best = obj_[c];
            enter = c;
          }
      }
      if (enter < 0) return RunResult::Optimal;

      int leave = -1;
      T best_ratio = from_double(0.0);
      for (int r = 0; r < rows_; ++r) {
        T* tr = row(r);
        if (!pivot_positive(tr[enter])) continue;
        T rhs = tr[width_ - 1];
        if (rhs < 0) rhs = from_double(0.0);
        T ratio = rhs / tr[enter];
        if (leave < 0 || ratio < best_ratio ||
            (ratio == best_ratio && basis_[r] < basis_[leave])) {
          leave = r;
          best_ratio = ratio;
        }
      }
      if (leave < 0) return RunResult::NoPivotRow;
      pivot(leave, enter);

      if constexpr (std::is_same_v<T, double>) {
        double cur = to_double(obj_[width_ - 1]);
        if (std::abs(cur - last_obj) <= 1e-13 * std::max(1.0, std::abs(cur))) {
          if (++degenerate_streak >= 200) bland = true;
        } else {
          degenerate_streak = 0;
          bland = false;
        }
        last_obj = cur;
      }
      (void)phase1;
    }
  }

  void pivot(int r, int e) {
    T* pr = row(r);
    T piv = pr[e];
    for (int c = 0; c < width_; ++c) pr[c] /= piv;
    pr[e] = from_double(1.0);
    eliminate_all(r, e);
    {
      T f = obj_[e];
      if (!(f == 0)) {
        for (int c = 0; c < width_; ++c) obj_[c] -= f * pr[c];
        obj_[e] = from_double(0.0);
      }
    }
    basis_[r] = e;
  }

  void eliminate_all(int r, int e) {
    T* pr = row(r);
    if constexpr (std::is_same_v<T, double>) {
      int w = width_;
      int nthreads = std::max(1, opt_.jobs);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (nthreads > 1) num_threads(nthreads)
#else
      (void)nthreads;
#endif
      for (int q = 0; q < rows_; ++q) {
        if (q == r) continue;
        double* tq = row(q);
        double f = tq[e];
        if (f == 0.0) continue;
        for (int c = 0; c < w; ++c) tq[c] -= f * pr[c];
        tq[e] = 0.0;
      }
    } else {
      for (int q = 0; q < rows_; ++q) {
        if (q == r) continue;
        T* tq = row(q);
        T f = tq[e];
        if (f == 0) continue;
        for (int c = 0; c < width_; ++c) tq[c] -= f * pr[c];
        tq[e] = from_double(0.0);
      }
    }
  }

  void drive_out_artificials() {
    for (int r = 0; r < rows_; ++r) {
      if (basis_[r] < art_begin_) continue;
      T* tr = row(r);
      int enter = -1;
      for (int c = 0; c < art_begin_; ++c) {
        if (pivot_positive(tr[c]) || pivot_positive(from_double(0.0) - tr[c])) {
          enter = c;
          break;
        }
      }
      if (enter < 0) continue;  // redundant row stays inert
      pivot(r, enter);
    }
  }

  void extract(LpSolution& out) {
    std::vector<T> xstd(nstruct_, from_double(0.0));
    for (int r = 0; r < rows_; ++r)
      if (basis_[r] < nstruct_) xstd[basis_[r]] = row(r)[width_ - 1];

    out.primal.resize(nstruct_);
    for (int j = 0; j < nstruct_; ++j) {
      double v = p_.lower[j] + to_double(xstd[j]);
      v = std::max(v, p_.lower[j]);
      if (p_.upper[j] != kLpInf) v = std::min(v, p_.upper[j]);
      out.primal[j] = v;
    }

    // Internal duals from the reduced costs of each row's origin column.
    std::vector<T> yint(rows_);
    for (int r = 0; r < rows_; ++r) yint[r] = from_double(0.0) - obj_[origin_col_[r]];

    out.dual.assign(p_.num_rows(), 0.0);
    std::vector<double> ybound(nstruct_, 0.0);
    for (int r = 0; r < rows_; ++r) {
      double y = to_double(yint[r]);
      if (negated_[r]) y = -y;
      y *= sense_sign_;
      if (row_orig_[r] >= 0)
        out.dual[row_orig_[r]] = y;
      else
        ybound[-1 - row_orig_[r]] = y;
    }

    // Objective recomputed from original data.
    double obj = 0.0;
    for (int j = 0; j < nstruct_; ++j) obj += p_.objective[j] * out.primal[j];
    out.objective = obj;

    // Dual objective: y.b over internal rows plus the lower-bound shift.
    T dual_int = from_double(0.0);
    for (int r = 0; r < rows_; ++r) dual_int += yint[r] * rhs_int_[r];
    T shift = from_double(0.0);
    for (int j = 0; j < nstruct_; ++j) shift += c_int_[j] * from_double(p_.lower[j]);
    out.dual_objective = sense_sign_ * (to_double(dual_int) + to_double(shift));

    double rel = std::max(1.0, std::abs(out.objective));
    if (std::abs(out.objective - out.dual_objective) > 1e-6 * rel)
      throw AuditError("SOLVER_STALL", "strong duality check failed");

    // Reduced costs against original data (bound-row duals included).
    out.reduced_cost.assign(nstruct_, 0.0);
    for (int j = 0; j < nstruct_; ++j) out.reduced_cost[j] = p_.objective[j] - ybound[j];
    for (std::size_t r = 0; r < p_.num_rows(); ++r) {
      double y = out.dual[r];
      if (y == 0.0) continue;
      for (auto& [j, a] : p_.rows[r].terms) out.reduced_cost[j] -= y * a;
    }

    // Primal residual check on the original rows.
    for (std::size_t r = 0; r < p_.num_rows(); ++r) {
      const auto& src = p_.rows[r];
      double lhs = 0.0;
      for (auto& [j, a] : src.terms) lhs += a * out.primal[j];
      double tol = 1e-8 * std::max(1.0, std::abs(src.rhs));
      bool bad = (src.rel == Relation::Le && lhs > src.rhs + tol) ||
                 (src.rel == Relation::Ge && lhs < src.rhs - tol) ||
                 (src.rel == Relation::Eq && std::abs(lhs - src.rhs) > tol);
      if (bad) throw AuditError("SOLVER_STALL", "primal residual check failed");
    }
  }
};

}  // namespace

LpSolution solve_lp(const LpProblem& p, const LpOptions& options) {
  if (options.exact) {
    SimplexCore<Rational> core(p, options);
    return core.run();
  }
  SimplexCore<double> core(p, options);
  return core.run();
}

}  // namespace coreaudit
