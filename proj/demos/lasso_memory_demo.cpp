// Solves one lasso instance with both solvers across memory lengths and
// prints iteration counts, the fitted rate and the H1 audit.

#include "kldescent/catalog.hpp"
#include "kldescent/diagnostics.hpp"
#include "kldescent/npg_major.hpp"
#include "kldescent/pgenls.hpp"

#include <iomanip>
#include <iostream>

namespace {

void summarize(const char* solver, int m, const kldescent::Trace& t) {
  kldescent::RateOptions opt;
  opt.reference = t.meta.rate_reference;
  const auto rate = kldescent::fit_rate(t, opt);
  const auto h1 = kldescent::check_h1(t, t.meta.h1_constant);
  std::cout << std::left << std::setw(10) << solver << " m=" << std::setw(3) << m << std::right << std::setw(6)
            << t.rows.size() - 1 << " its  F=" << std::setprecision(12) << t.rows.back().F << std::setprecision(4)
            << "  rate " << to_string(rate.verdict) << " rho " << rate.rho << "  H1 " << (h1.pass ? "pass" : "FAIL")
            << '\n';
}

}  // namespace

int main() {
  const auto inst = kldescent::make_problem("lasso", {{"seed", 3}});
  for (int m : {0, 2, 5, 10}) {
    kldescent::NpgConfig npg;
    npg.m = m;
    summarize("npg_major", m, kldescent::npg_solve(inst.problem, inst.x0, npg));
    kldescent::PgenlsConfig pg;
    pg.m = m;
    summarize("pgenls", m, kldescent::pgenls_solve(inst.problem, inst.x0, pg));
  }
}
