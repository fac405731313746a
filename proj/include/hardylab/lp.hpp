#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "hardylab/common.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Exact solver for the LP family behind the grand maximal function:
//
//   maximize    c . x
//   subject to  |x_k|        <= box_k,
//               |x_a - x_b|  <= w_ab   for the given pair list.
//
// x = 0 is always feasible and the box makes the problem bounded, so an
// optimum exists. We run a primal simplex on the dual
//
//   minimize    cost . y   s.t.  A y = c,  y >= 0,
//
// whose columns have at most two nonzeros (+-1), which keeps pricing O(1) per
// column. The simplex multipliers of the optimal basis are the primal optimum;
// solutions are certified by primal feasibility plus a vanishing duality gap.
// ---------------------------------------------------------------------------
struct LpInstance {
  struct Pair {
    int a, b;
    double w;
  };
  std::vector<double> c;
  std::vector<double> box;
  std::vector<Pair> pairs;

  int vars() const { return static_cast<int>(c.size()); }
};

struct LpResult {
  bool optimal = false;
  double value = 0.0;
  std::vector<double> x;
  int iterations = 0;
  double duality_gap = 0.0;
  double primal_violation = 0.0;
  std::string status;
};

namespace lpdetail {

struct Column {
  int row_pos;   // row with +1
  int row_neg;   // row with -1, or -1 if none
  double cost;
};

}  // namespace lpdetail

inline LpResult solve_box_pair_lp(const LpInstance& inst, int max_iterations = 200000) {
  using lpdetail::Column;
  const int n = inst.vars();
  LpResult res;
  if (n == 0) {
    res.optimal = true;
    res.status = "optimal";
    return res;
  }

  double scale = 1.0;
  for (double ck : inst.c) scale = std::max(scale, std::abs(ck));
  for (double bk : inst.box) scale = std::max(scale, bk);
  const double tol = 1e-11 * scale;

  // columns: per variable the two box columns, then two per pair
  std::vector<Column> cols;
  cols.reserve(2 * n + 2 * inst.pairs.size());
  for (int k = 0; k < n; ++k) {
    cols.push_back({k, -1, inst.box[k]});   // +e_k
    cols.push_back({-1, k, inst.box[k]});   // -e_k
  }
  for (const auto& p : inst.pairs) {
    cols.push_back({p.a, p.b, p.w});        // x_a - x_b <= w
    cols.push_back({p.b, p.a, p.w});        // x_b - x_a <= w
  }
  const int m = static_cast<int>(cols.size());

  // starting basis: per row the box column matching the sign of c
  std::vector<int> basis(n);
  std::vector<double> xb(n);
  // binv stored row-major; start from a signed identity
  std::vector<double> binv(static_cast<std::size_t>(n) * n, 0.0);
  for (int k = 0; k < n; ++k) {
    if (inst.c[k] >= 0.0) {
      basis[k] = 2 * k;
      xb[k] = inst.c[k];
      binv[static_cast<std::size_t>(k) * n + k] = 1.0;
    } else {
      basis[k] = 2 * k + 1;
      xb[k] = -inst.c[k];
      binv[static_cast<std::size_t>(k) * n + k] = -1.0;
    }
  }

  std::vector<double> pi(n), dir(n);
  bool bland = false;
  int stall = 0;
  double last_obj = kInf;

  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    // multipliers: pi = Binv^T cost_B
    for (int i = 0; i < n; ++i) pi[i] = 0.0;
    for (int r = 0; r < n; ++r) {
      double cb = cols[basis[r]].cost;
      if (cb == 0.0) continue;
      const double* row = &binv[static_cast<std::size_t>(r) * n];
      for (int i = 0; i < n; ++i) pi[i] += cb * row[i];
    }

    // pricing
    int enter = -1;
    double best = -tol;
    for (int j = 0; j < m; ++j) {
      const Column& col = cols[j];
      double piaj = 0.0;
      if (col.row_pos >= 0) piaj += pi[col.row_pos];
      if (col.row_neg >= 0) piaj -= pi[col.row_neg];
      double rc = col.cost - piaj;
      if (rc < -tol) {
        if (bland) {
          enter = j;
          break;
        }
        if (rc < best) {
          best = rc;
          enter = j;
        }
      }
    }
    if (enter < 0) break;  // optimal

    // direction d = Binv * a_enter
    const Column& ec = cols[enter];
    for (int r = 0; r < n; ++r) {
      const double* row = &binv[static_cast<std::size_t>(r) * n];
      double v = 0.0;
      if (ec.row_pos >= 0) v += row[ec.row_pos];
      if (ec.row_neg >= 0) v -= row[ec.row_neg];
      dir[r] = v;
    }

    // ratio test
    int leave = -1;
    double theta = kInf;
    for (int r = 0; r < n; ++r) {
      if (dir[r] > 1e-12) {
        double ratio = xb[r] / dir[r];
        if (ratio < theta - 1e-15 ||
            (ratio < theta + 1e-15 && (leave < 0 || basis[r] < basis[leave]))) {
          theta = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0) {
      res.status = "dual-unbounded";
      res.iterations = iter;
      return res;  // cannot happen for well-formed instances
    }

    // pivot
    double piv = dir[leave];
    double* lrow = &binv[static_cast<std::size_t>(leave) * n];
    for (int i = 0; i < n; ++i) lrow[i] /= piv;
    for (int r = 0; r < n; ++r) {
      if (r == leave || dir[r] == 0.0) continue;
      double* row = &binv[static_cast<std::size_t>(r) * n];
      double f = dir[r];
      for (int i = 0; i < n; ++i) row[i] -= f * lrow[i];
      xb[r] -= theta * dir[r];
      if (xb[r] < 0.0) xb[r] = 0.0;
    }
    xb[leave] = theta;
    basis[leave] = enter;

    // stall detection -> Bland's rule
    double obj = 0.0;
    for (int r = 0; r < n; ++r) obj += cols[basis[r]].cost * xb[r];
    if (obj < last_obj - tol) {
      last_obj = obj;
      stall = 0;
      bland = false;
    } else if (++stall > 64) {
      bland = true;
    }
  }
  res.iterations = iter;
  if (iter >= max_iterations) {
    res.status = "iteration-limit";
    return res;
  }

  // primal solution from the final multipliers
  for (int i = 0; i < n; ++i) pi[i] = 0.0;
  for (int r = 0; r < n; ++r) {
    double cb = cols[basis[r]].cost;
    if (cb == 0.0) continue;
    const double* row = &binv[static_cast<std::size_t>(r) * n];
    for (int i = 0; i < n; ++i) pi[i] += cb * row[i];
  }
  res.x = pi;

  double dual_obj = 0.0;
  for (int r = 0; r < n; ++r) dual_obj += cols[basis[r]].cost * xb[r];
  double primal_obj = 0.0;
  for (int k = 0; k < n; ++k) primal_obj += inst.c[k] * res.x[k];

  double viol = 0.0;
  for (int k = 0; k < n; ++k) viol = std::max(viol, std::abs(res.x[k]) - inst.box[k]);
  for (const auto& p : inst.pairs)
    viol = std::max(viol, std::abs(res.x[p.a] - res.x[p.b]) - p.w);

  res.value = primal_obj;
  res.duality_gap = std::abs(primal_obj - dual_obj);
  res.primal_violation = std::max(0.0, viol);
  res.optimal = res.duality_gap <= 1e-7 * (1.0 + std::abs(dual_obj)) &&
                res.primal_violation <= 1e-7 * (1.0 + scale);
  res.status = res.optimal ? "optimal" : "uncertified";
  return res;
}

// plain-text export for external cross-checks
inline std::string export_lp_text(const LpInstance& inst) {
  std::ostringstream os;
  os.precision(17);
  os << "# box-pair LP: maximize c.x, |x_k| <= box_k, |x_a - x_b| <= w\n";
  os << "vars " << inst.vars() << "\n";
  for (int k = 0; k < inst.vars(); ++k)
    os << "var " << k << " c " << inst.c[k] << " box " << inst.box[k] << "\n";
  for (const auto& p : inst.pairs) os << "pair " << p.a << " " << p.b << " w " << p.w << "\n";
  return os.str();
}

}  // namespace hardylab
