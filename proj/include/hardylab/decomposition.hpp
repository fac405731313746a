#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hardylab/common.hpp"
#include "hardylab/kernels.hpp"
#include "hardylab/maximal.hpp"
#include "hardylab/space.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Calibration of the summation constant: the smallest C such that, for nets
// {x_j} at scale t with overlap <= L,
//
//   sum_{j : d(x_j,x) >= h t d(x_j)} d(x_j)^{-D-a} (1 + d(x_j,x)/(t d(x_j)))^{-D-b}
//     <= C d(x)^{-D-a} max{t^b, (1+h)^{-b}}
//
// over all sampled (x, h, t), inflated by a safety factor. The constant is
// existential in the underlying estimate; downstream correctness is enforced
// by exact per-level residual checks, so a calibrated value is sufficient.
// ---------------------------------------------------------------------------
struct CalibrationOptions {
  double draft_eta = 0.25;
  int t_samples = 3;
  double safety = 2.0;
  int max_eta_k = 60;
};

inline double calibrate_sum_constants(const DiscreteSpace& space, int basepoint, double net_a,
                                      double D, double a, double b,
                                      const CalibrationOptions& opts = CalibrationOptions{},
                                      std::vector<std::string>* warnings = nullptr) {
  if (b < a) throw std::invalid_argument("calibrate_sum_constants: need b >= a");
  BaseDistance dist(space, basepoint);
  Field ones(space, 1.0);

  std::vector<double> fitted;
  double t = opts.draft_eta;
  for (int k = 0; k < opts.t_samples; ++k, t *= opts.draft_eta) {
    if (t < 0.5 * space.spacing()) break;
    Net net = maximal_net(space, basepoint, std::min(0.5, t), net_a, ones);
    if (net.centers.empty()) {
      fitted.push_back(1.0);  // empty sum: floor value
      continue;
    }
    std::vector<double> h_grid = {0.0, 0.5};
    for (double h = 1.0; h < 2.0 / t; h *= 2.0) h_grid.push_back(h);

    double worst = parallel_reduce<double>(
        space.size(), 0.0,
        [&](std::size_t lo, std::size_t hi, double acc) {
          for (std::size_t xi = lo; xi < hi; ++xi) {
            int x = static_cast<int>(xi);
            double dx = dist(x);
            for (double h : h_grid) {
              double lhs = 0.0;
              for (int xj : net.centers) {
                double dj = dist(xj);
                double dxj = space.dist(xj, x);
                if (dxj < h * t * dj) continue;
                lhs += std::pow(dj, -D - a) * std::pow(1.0 + dxj / (t * dj), -D - b);
              }
              double rhs = std::pow(dx, -D - a) *
                           std::max(std::pow(t, b), std::pow(1.0 + h, -b));
              if (rhs > 0.0) acc = std::max(acc, lhs / rhs);
            }
          }
          return acc;
        },
        [](double x, double y) { return std::max(x, y); });
    fitted.push_back(std::max(1.0, worst));
  }

  double cmax = 1.0;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    cmax = std::max(cmax, fitted[i]);
    if (i > 0 && fitted[i] > 1.5 * fitted[i - 1] && warnings)
      warnings->push_back("calibrate_sum_constants: fitted C grew >50% between t samples (" +
                          std::to_string(fitted[i - 1]) + " -> " + std::to_string(fitted[i]) + ")");
  }
  return opts.safety * cmax;
}

// ---------------------------------------------------------------------------
// The constant ledger: every numeric choice the decomposition relies on, with
// all feasibility conditions machine-checked.
// ---------------------------------------------------------------------------
struct ConstantLedger {
  double D = 1.0, gamma = 1.0;
  double space_A = 0.0;          // fitted Ahlfors constant of the stage space
  double c = 0.0;                // certified on-diagonal constant of the scaled kernel
  double c1 = 0.0, c2 = 0.0;     // nonvanishing constants
  double kappa = 0.0;            // normalisation, fixed by the closed formula
  double sigma = 0.0;
  double L = 1.0;                // realized net constant (overlap and averaging)
  double C_half = 1.0;           // calibrated constant for (a,b) = (gamma/2, gamma)
  double C_3half = 1.0;          // calibrated constant for (a,b) = (3 gamma/2, 2 gamma)
  double delta = 0.0, eta = 0.0;
  double rho = 0.0, p = 0.0;
  double E = 0.0;                // measured majorisation constant, filled by the check
  bool feasible = false;
  std::string binding;           // named binding constraint when infeasible
  std::map<std::string, bool> conditions;
  std::vector<std::string> warnings;

  // the nine interlocking feasibility inequalities, named by their role
  void recheck_conditions() {
    conditions["eta_half"] = eta <= 0.5;
    conditions["w_size_damping"] = C_half * kappa * delta <= 0.25 + 1e-15;
    conditions["w_holder_damping"] = C_3half * kappa * delta <= 0.25 + 1e-15;
    conditions["delta_quarter"] = 1.0 - delta >= 0.75;
    conditions["eta_sqrt_half"] = std::pow(eta, gamma / 2.0) <= 0.5;
    conditions["decay_dominates_holder"] = 1.0 - delta >= 2.0 * std::pow(eta, gamma);
    conditions["eta_quarter"] = eta <= 0.25;
    conditions["sign_mass_margin"] =
        std::pow(eta, gamma) <=
        c1 * std::pow(2.0, -D - gamma / 2.0) / (4.0 * C_half * std::pow(sigma, -gamma));
    conditions["volume_decay"] = std::pow(eta, D) < 1.0 - delta;
  }

  bool all_conditions() const {
    for (const auto& kv : conditions)
      if (!kv.second) return false;
    return true;
  }
};

inline ConstantLedger choose_constants(const DiscreteSpace& space, int basepoint,
                                       const FittedConstants& fit, double space_A = 0.0,
                                       const CalibrationOptions& opts = CalibrationOptions{}) {
  if (!(fit.c > 0.0) || !(fit.c < 1.0))
    throw std::invalid_argument("choose_constants: kernel must be certified with c in (0,1)");
  ConstantLedger lg;
  lg.D = fit.D;
  lg.gamma = fit.gamma;
  lg.space_A = space_A;
  lg.c = fit.c;
  lg.c1 = fit.c / 2.0;
  lg.c2 = std::min(std::pow(fit.c / 2.0, 1.0 / fit.gamma), 0.25);
  lg.kappa = 1.0 / (lg.c1 * std::pow(2.0, -1.0 - lg.D - lg.gamma / 2.0));
  lg.sigma = std::min(
      0.25, std::pow(2.0 * (std::pow(4.0, lg.D + 1.5 * lg.gamma) + 2.0 / 3.0), -1.0 / lg.gamma));

  // realized net constant from draft-scale nets with unit g
  Field ones(space, 1.0);
  double L = 1.0;
  double t = opts.draft_eta;
  for (int k = 0; k < opts.t_samples; ++k, t *= opts.draft_eta) {
    if (t < 0.5 * space.spacing()) break;
    Net net = maximal_net(space, basepoint, std::min(0.5, t), lg.c2, ones);
    L = std::max({L, static_cast<double>(net.overlap_bound), net.average_constant});
  }
  lg.L = L;

  lg.C_half = calibrate_sum_constants(space, basepoint, lg.c2, lg.D, lg.gamma / 2.0, lg.gamma,
                                      opts, &lg.warnings);
  lg.C_3half = calibrate_sum_constants(space, basepoint, lg.c2, lg.D, 1.5 * lg.gamma,
                                       2.0 * lg.gamma, opts, &lg.warnings);

  // largest delta obeying both damping conditions and 1-delta >= 3/4
  lg.delta = std::min({0.25, 0.25 / (lg.kappa * lg.C_half), 0.25 / (lg.kappa * lg.C_3half)});

  // largest dyadic eta obeying the remaining conditions
  double sign_margin_rhs =
      lg.c1 * std::pow(2.0, -lg.D - lg.gamma / 2.0) / (4.0 * lg.C_half * std::pow(lg.sigma, -lg.gamma));
  lg.eta = 0.0;
  for (int k = 2; k <= opts.max_eta_k; ++k) {
    double eta = std::pow(2.0, -k);
    if (std::pow(eta, lg.gamma / 2.0) > 0.5) continue;
    if (1.0 - lg.delta < 2.0 * std::pow(eta, lg.gamma)) continue;
    if (std::pow(eta, lg.gamma) > sign_margin_rhs) continue;
    if (std::pow(eta, lg.D) >= 1.0 - lg.delta) continue;
    lg.eta = eta;
    break;
  }
  if (lg.eta == 0.0) {
    lg.feasible = false;
    lg.binding = "sign_mass_margin";
    lg.recheck_conditions();
    return lg;
  }

  lg.rho = std::log(1.0 - lg.delta) / std::log(std::pow(lg.eta, lg.D));
  lg.p = 1.0 / (1.0 + lg.rho);
  lg.recheck_conditions();
  lg.feasible = lg.all_conditions() && lg.rho > 0.0 && lg.rho < 1.0;
  if (!lg.feasible)
    for (const auto& kv : lg.conditions)
      if (!kv.second) lg.binding = kv.first;
  return lg;
}

// ---------------------------------------------------------------------------
// Iterative decomposition of a Hoelder cutoff into kernel superpositions.
//
// phi_0 = phi (rescaled to sup <= 2^{-D-gamma/2}); at level i the net at scale
// eta^{1+i} is built with g = (K* f)^{1/2}, the signs are eps_ij = sgn
// phi_i(x_ij), and
//
//   w_i = kappa delta (1-delta)^i sum_j eps_ij d(x_ij)^{-gamma/2}
//             eta^{D(1+i)} K(eta^{1+i} d(x_ij), x_ij, .),
//   phi_{i+1} = phi_i - w_i.
//
// Every level asserts the residual bound |phi_i| <= (1-delta)^i d^{-D-gamma/2}
// exactly on the discrete space, and aborts with diagnostics if it fails.
// ---------------------------------------------------------------------------
struct DecompositionLevel {
  std::vector<int> centers;
  std::vector<double> times;
  std::vector<int> signs;
  std::vector<double> coeffs;
  double residual_ratio = 0.0;   // sup_x |phi_{i+1}| / ((1-delta)^{i+1} d^{-D-g/2})
  double w_apriori_ratio = 0.0;  // sup_x |w_i| / (1/4 (1-delta)^i d^{-D-g/2})
  int overlap = 0;
  bool below_resolution = false;
  bool times_ok = true;
  bool avg_ok = true;
};

struct Decomposition {
  ConstantLedger ledger;
  int basepoint = 0;
  double rescale = 1.0;
  Field phi0;  // rescaled input
  std::vector<DecompositionLevel> levels;
  std::vector<Field> w;
  Field residual;  // phi_N
  bool ok = false;
  std::string failure;
};

// membership check for F_gamma(o, r): support, box and pairwise Hoelder bounds
inline bool in_holder_family(const Field& phi, int o, double r, double gamma,
                             std::string* why = nullptr) {
  const DiscreteSpace& space = *phi.space;
  double rD = std::pow(r, -static_cast<double>(space.dimension()));
  for (int y = 0; y < space.size(); ++y) {
    if (phi[y] != 0.0 && space.dist(o, y) > r) {
      if (why) *why = "support exceeds the ball at point " + std::to_string(y);
      return false;
    }
    if (std::abs(phi[y]) > rD * (1.0 + 1e-12)) {
      if (why) *why = "size bound violated at point " + std::to_string(y);
      return false;
    }
  }
  int stride = space.size() <= 2048 ? 1 : space.size() / 2048 + 1;
  for (int y = 0; y < space.size(); y += stride) {
    for (int z = y + 1; z < space.size(); z += stride) {
      double d = space.dist(y, z);
      if (d <= 0.0) continue;
      if (std::abs(phi[y] - phi[z]) > rD * std::pow(d / r, gamma) * (1.0 + 1e-12)) {
        if (why)
          *why = "Hoelder bound violated at pair (" + std::to_string(y) + "," +
                 std::to_string(z) + ")";
        return false;
      }
    }
  }
  return true;
}

inline Decomposition uchiyama_decompose(const Field& phi, const Kernel& scaled_kernel,
                                        const ConstantLedger& ledger, const Field& f, int levels,
                                        int basepoint) {
  const DiscreteSpace& space = *scaled_kernel.space;
  if (!ledger.feasible) throw std::invalid_argument("uchiyama_decompose: infeasible ledger");
  std::string why;
  if (!in_holder_family(phi, basepoint, 1.0, ledger.gamma, &why))
    throw std::invalid_argument("uchiyama_decompose: cutoff not in F_gamma(o,1): " + why);

  Decomposition dec;
  dec.ledger = ledger;
  dec.basepoint = basepoint;
  BaseDistance d(space, basepoint);

  double cap = std::pow(2.0, -ledger.D - ledger.gamma / 2.0);
  double sup_phi = phi.sup();
  dec.rescale = (sup_phi > cap) ? cap / sup_phi : 1.0;
  dec.phi0 = phi;
  for (double& v : dec.phi0.v) v *= dec.rescale;

  // g = (K* f)^{1/2} feeds every level's net
  MaximalResult mr = radial_maximal(scaled_kernel, f);
  Field g(space);
  for (int i = 0; i < space.size(); ++i) g[i] = std::sqrt(mr.field[i]);

  std::vector<double> dpow_env(space.size());  // d(x)^{-D-gamma/2}
  for (int i = 0; i < space.size(); ++i)
    dpow_env[i] = std::pow(d(i), -ledger.D - ledger.gamma / 2.0);

  Field phi_i = dec.phi0;
  double decay = 1.0;  // (1-delta)^i
  dec.ok = true;
  for (int lvl = 0; lvl < levels; ++lvl) {
    DecompositionLevel rec;
    double t = std::pow(ledger.eta, 1 + lvl);
    rec.below_resolution = t < 2.0 * space.spacing();
    Net net = maximal_net(space, basepoint, t, ledger.c2, g);
    rec.centers = net.centers;
    rec.overlap = net.overlap_bound;

    double coeff_base = ledger.kappa * ledger.delta * decay *
                        std::pow(std::pow(ledger.eta, ledger.D), 1 + lvl);
    for (int xj : net.centers) {
      double tj = t * d(xj);
      rec.times.push_back(tj);
      rec.times_ok = rec.times_ok && tj <= 1.0 + 1e-12;
      double pv = phi_i[xj];
      rec.signs.push_back(pv > 0.0 ? 1 : (pv < 0.0 ? -1 : 0));
      rec.coeffs.push_back(coeff_base * std::pow(d(xj), -ledger.gamma / 2.0));
    }

    // averaging condition re-check with the ledger constant
    for (std::size_t j = 0; j < rec.centers.size(); ++j) {
      int xj = rec.centers[j];
      double r = t * d(xj);
      double mass = 0.0, avg = 0.0;
      for (int z = 0; z < space.size(); ++z) {
        if (space.dist(xj, z) <= r) {
          mass += space.weight(z);
          avg += g[z] * space.weight(z);
        }
      }
      avg /= mass;
      if (g[xj] > std::max(ledger.L, net.average_constant) * avg + 1e-12) rec.avg_ok = false;
    }

    Field w_i(space);
    parallel_for(space.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t x = lo; x < hi; ++x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < rec.centers.size(); ++j) {
          if (rec.signs[j] == 0) continue;
          int xj = rec.centers[j];
          double tj = rec.times[j];
          if (space.dist(xj, static_cast<int>(x)) > scaled_kernel.support_at(tj)) continue;
          acc += rec.signs[j] * rec.coeffs[j] * scaled_kernel(tj, xj, static_cast<int>(x));
        }
        w_i[static_cast<int>(x)] = acc;
      }
    });

    double w_ratio = 0.0;
    for (int x = 0; x < space.size(); ++x)
      w_ratio = std::max(w_ratio, std::abs(w_i[x]) / (0.25 * decay * dpow_env[x]));
    rec.w_apriori_ratio = w_ratio;

    Field phi_next(space);
    for (int x = 0; x < space.size(); ++x) phi_next[x] = phi_i[x] - w_i[x];

    double next_decay = decay * (1.0 - ledger.delta);
    double res_ratio = 0.0;
    int witness = 0;
    for (int x = 0; x < space.size(); ++x) {
      double ratio = std::abs(phi_next[x]) / (next_decay * dpow_env[x]);
      if (ratio > res_ratio) {
        res_ratio = ratio;
        witness = x;
      }
    }
    rec.residual_ratio = res_ratio;

    dec.w.push_back(w_i);
    dec.levels.push_back(rec);
    phi_i = phi_next;
    decay = next_decay;

    if (res_ratio > 1.0 + 1e-9) {
      std::ostringstream os;
      os << "residual bound failed at level " << lvl << ", point " << witness << ", ratio "
         << res_ratio;
      dec.failure = os.str();
      dec.ok = false;
      break;
    }
  }
  dec.residual = phi_i;
  return dec;
}

struct ReconstructReport {
  double identity_error = 0.0;   // || (phi0 - sum w_i) - residual ||_inf
  double residual_sup = 0.0;
  double residual_bound = 0.0;   // (1 - delta)^N
  bool bound_ok = false;
};

inline std::pair<Field, ReconstructReport> reconstruct(const Decomposition& dec) {
  const DiscreteSpace& space = *dec.phi0.space;
  Field sum(space);
  for (const Field& w : dec.w)
    for (int x = 0; x < space.size(); ++x) sum[x] += w[x];
  ReconstructReport rep;
  for (int x = 0; x < space.size(); ++x)
    rep.identity_error =
        std::max(rep.identity_error, std::abs((dec.phi0[x] - sum[x]) - dec.residual[x]));
  rep.residual_sup = dec.residual.sup();
  rep.residual_bound = std::pow(1.0 - dec.ledger.delta, static_cast<double>(dec.levels.size()));
  rep.bound_ok = rep.residual_sup <= rep.residual_bound * (1.0 + 1e-9);
  return {sum, rep};
}

// ---------------------------------------------------------------------------
// Majorisation audit: empirical E with
//   |int phi f dm| <= E (M((K* f)^p)(o))^{1/p}
// over a family of cutoffs (including rescaled ones via the candidate library)
// and sample functions f. M is the global centred maximal operator.
// ---------------------------------------------------------------------------
struct MajorizationRow {
  std::string cutoff;
  int f_index = 0;
  double numerator = 0.0;
  double denominator = 0.0;
  double ratio = 0.0;
};

struct MajorizationReport {
  double E = 0.0;
  std::vector<MajorizationRow> rows;
  int degenerate = 0;  // zero denominator with nonzero pairing
};

inline MajorizationReport majorization_check(const std::vector<Field>& cutoffs,
                                             const std::vector<Field>& samples,
                                             const Kernel& scaled_kernel,
                                             const ConstantLedger& ledger, int basepoint,
                                             const std::vector<double>& extra_radii = {1.0, 0.5,
                                                                                       0.25}) {
  const DiscreteSpace& space = *scaled_kernel.space;
  MajorizationReport rep;
  GrandOptions gopt;
  gopt.gamma = ledger.gamma;
  gopt.slice_kernel = &scaled_kernel;

  for (std::size_t fi = 0; fi < samples.size(); ++fi) {
    const Field& f = samples[fi];
    MaximalResult mr = radial_maximal(scaled_kernel, f);
    Field kp(space);
    for (int x = 0; x < space.size(); ++x) kp[x] = std::pow(mr.field[x], ledger.p);
    Field m = hl_maximal(space, kp, space.diameter());
    double denom = std::pow(m[basepoint], 1.0 / ledger.p);

    auto push = [&](const std::string& name, double num) {
      if (num <= 1e-14 && denom <= 1e-14) return;
      MajorizationRow row;
      row.cutoff = name;
      row.f_index = static_cast<int>(fi);
      row.numerator = num;
      row.denominator = denom;
      if (denom <= 1e-300) {
        ++rep.degenerate;
        return;
      }
      row.ratio = num / denom;
      rep.rows.push_back(row);
      rep.E = std::max(rep.E, row.ratio);
    };

    for (std::size_t ci = 0; ci < cutoffs.size(); ++ci) {
      double num = 0.0;
      for (int x = 0; x < space.size(); ++x)
        num += cutoffs[ci][x] * f[x] * space.weight(x);
      push("cutoff" + std::to_string(ci), std::abs(num));
    }
    for (double r : extra_radii) {
      if (r < 2.0 * space.spacing()) continue;
      push("candidates@r=" + std::to_string(r),
           grand_candidates_at(space, f, basepoint, r, gopt));
    }
  }
  return rep;
}

}  // namespace hardylab
