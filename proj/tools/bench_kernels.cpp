// Benchmark comparing the serial reference paths (jobs = 1) against the
// OpenMP-parallel kernels on the same inputs: simplex tableau updates,
// randomized rounding trials, and exact-oracle enumeration.  Besides timing,
// every pair of runs is checked for identical results; the process exits
// nonzero if any kernel diverges.
#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "coreaudit/core_approval.hpp"
#include "coreaudit/gen.hpp"
#include "coreaudit/model.hpp"
#include "coreaudit/oracles.hpp"
#include "coreaudit/report.hpp"

using namespace coreaudit;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

int hardware_jobs() {
#ifdef _OPENMP
  return omp_get_max_threads() > 1 ? omp_get_max_threads() : 2;
#else
  return 2;
#endif
}

struct Line {
  const char* kernel;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

void print_line(const Line& l) {
  std::printf("%-24s %10.1f ms %10.1f ms   x%.2f   %s\n", l.kernel, l.serial_ms,
              l.parallel_ms,
              l.parallel_ms > 0 ? l.serial_ms / l.parallel_ms : 0.0,
              l.identical ? "identical" : "DIVERGED");
}

}  // namespace

int main() {
  const int par = hardware_jobs();
  std::printf("kernel                      serial        parallel(%d)  speedup  check\n",
              par);

  RandomGenParams mid;
  mid.n = 40;
  mid.m = 32;
  mid.k = 6;
  mid.density = 0.25;
  mid.seed = 91;
  AuditInstance mid_inst = gen_random(mid);

  bool all_ok = true;

  {  // Simplex tableau updates.
    LpOptions serial;
    serial.jobs = 1;
    LpOptions parallel;
    parallel.jobs = par;
    auto t0 = std::chrono::steady_clock::now();
    ThetaP a = theta_p(mid_inst, serial);
    double ta = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    ThetaP b = theta_p(mid_inst, parallel);
    double tb = ms_since(t0);
    bool same = a.value.has_value() == b.value.has_value() &&
                (!a.value || *a.value == *b.value) &&
                a.lp_iterations == b.lp_iterations;
    print_line({"simplex tableau", ta, tb, same});
    all_ok = all_ok && same;

    if (a.value) {  // Rounding trials on the relaxation just computed.
      const FractionalSolution& frac = *a.solution;
      t0 = std::chrono::steady_clock::now();
      AuditReport ra = round_log_m(mid_inst, frac, 512, 7, 1);
      double tra = ms_since(t0);
      t0 = std::chrono::steady_clock::now();
      AuditReport rb = round_log_m(mid_inst, frac, 512, 7, par);
      double trb = ms_since(t0);
      bool rsame = report_to_json(ra).dump() == report_to_json(rb).dump();
      print_line({"rounding trials", tra, trb, rsame});
      all_ok = all_ok && rsame;
    }
  }

  {  // Exact enumeration.
    RandomGenParams small;
    small.n = 9;
    small.m = 15;
    small.k = 4;
    small.density = 0.4;
    small.seed = 17;
    AuditInstance small_inst = gen_random(small);
    auto t0 = std::chrono::steady_clock::now();
    ExactAudit a = exact_theta_core(small_inst, {}, 1);
    double ta = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    ExactAudit b = exact_theta_core(small_inst, {}, par);
    double tb = ms_since(t0);
    bool same = a.theta.has_value() == b.theta.has_value() &&
                (!a.theta || *a.theta == *b.theta);
    print_line({"exact enumeration", ta, tb, same});
    all_ok = all_ok && same;
  }

  if (!all_ok) {
    std::fprintf(stderr, "parallel kernels diverged from the serial reference\n");
    return 1;
  }
  return 0;
}
