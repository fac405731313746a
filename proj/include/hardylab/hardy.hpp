#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "hardylab/common.hpp"
#include "hardylab/kernels.hpp"
#include "hardylab/maximal.hpp"
#include "hardylab/space.hpp"

namespace hardylab {

struct Ball {
  int center = 0;
  double radius = 0.0;
};

// ---------------------------------------------------------------------------
// Atom and ion validation. p = infinity is the default exponent, where the
// size condition reads sup|a| <= m(B)^{-1} and is exact on discrete spaces.
// ---------------------------------------------------------------------------
struct AtomCheck {
  bool ok = false;
  std::string flavor;  // "standard" | "global" | "ion" | "reject"
  std::vector<std::string> reasons;
  double lp_norm = 0.0;
  double size_bound = 0.0;
  double mean = 0.0;
  double mean_tol = 0.0;
};

namespace detail {

inline AtomCheck atom_basics(const Field& a, Ball B, double p) {
  const DiscreteSpace& space = *a.space;
  AtomCheck chk;
  for (int y = 0; y < space.size(); ++y) {
    if (a[y] != 0.0 && space.dist(B.center, y) > B.radius * (1.0 + 1e-12)) {
      chk.reasons.push_back("support exceeds the ball");
      break;
    }
  }
  double mB = space.ball_measure(B.center, B.radius);
  double pprime = std::isinf(p) ? 1.0 : p / (p - 1.0);
  chk.size_bound = std::pow(mB, -1.0 / pprime);
  chk.lp_norm = a.lp(p);
  if (chk.lp_norm > chk.size_bound * (1.0 + 1e-9))
    chk.reasons.push_back("size condition violated");
  chk.mean = a.integral();
  chk.mean_tol = 1e-10 * a.l1();
  return chk;
}

}  // namespace detail

inline AtomCheck validate_atom(const Field& a, Ball B, double s, double p = kInf) {
  AtomCheck chk = detail::atom_basics(a, B, p);
  bool radius_le = B.radius <= s * (1.0 + 1e-12);
  bool radius_eq = std::abs(B.radius - s) <= 1e-12 * s;
  bool cancel = std::abs(chk.mean) <= chk.mean_tol;

  if (chk.reasons.empty() && radius_le && cancel) {
    chk.ok = true;
    chk.flavor = "standard";
    return chk;
  }
  if (chk.reasons.empty() && radius_eq) {
    chk.ok = true;
    chk.flavor = "global";
    return chk;
  }
  chk.flavor = "reject";
  if (!radius_le) chk.reasons.push_back("radius exceeds scale");
  if (!cancel) chk.reasons.push_back("cancellation condition violated");
  if (!radius_eq) chk.reasons.push_back("radius differs from scale (global flavor)");
  return chk;
}

inline AtomCheck validate_ion(const Field& g, Ball B, double s, double p = kInf) {
  AtomCheck chk = detail::atom_basics(g, B, p);
  if (B.radius > s * (1.0 + 1e-12)) chk.reasons.push_back("radius exceeds scale");
  if (std::abs(chk.mean) > B.radius + chk.mean_tol)
    chk.reasons.push_back("mean exceeds the ball radius");
  chk.ok = chk.reasons.empty();
  chk.flavor = chk.ok ? "ion" : "reject";
  return chk;
}

// ---------------------------------------------------------------------------
// Pushforward of an atom under a bi-Lipschitz patch identification with a
// Lipschitz multiplier: g(x') = rho(x') phi(Psi(x')) a(Psi(x'))/H, an ion at
// scale A s once H clears the explicit threshold.
// ---------------------------------------------------------------------------
struct PushforwardSpec {
  const DiscreteSpace* target = nullptr;  // M'
  std::vector<int> psi;                   // M' patch -> M, -1 off-patch
  double A = 1.0;                         // bi-Lipschitz constant
  double L = 1.0;                         // multiplier bound and Lipschitz constant
  const Field* multiplier = nullptr;      // phi on M (nullptr = identically 1)
  double H = 1.0;
  double ahlfors_A_src = 1.0;
  double ahlfors_A_dst = 1.0;
};

inline double pushforward_min_H(const PushforwardSpec& spec, double s, double D, double p = kInf) {
  double pprime = std::isinf(p) ? 1.0 : p / (p - 1.0);
  double kappa_A = spec.ahlfors_A_src * spec.ahlfors_A_dst;
  double h1 = spec.L / spec.A;
  double h2 = spec.L / (spec.A * s);
  double h3 = spec.L * std::pow(spec.A, 2.0 * D / pprime) * std::pow(kappa_A, 2.0 / pprime);
  return std::max({h1, h2, h3});
}

struct PushforwardResult {
  Field g;
  Ball ball;
  double H_used = 0.0;
  double H_min = 0.0;
};

inline PushforwardResult atom_to_ion(const Field& a, Ball B, double s,
                                     const PushforwardSpec& spec, double p = kInf) {
  const DiscreteSpace& src = *a.space;
  const DiscreteSpace& dst = *spec.target;
  double H_min = pushforward_min_H(spec, s, src.dimension(), p);
  if (spec.H < H_min * (1.0 - 1e-12))
    throw std::invalid_argument("atom_to_ion: H below the admissible threshold " +
                                std::to_string(H_min));

  // preimage of the atom's support must lie inside the patch
  std::vector<char> covered(src.size(), 0);
  for (int xp = 0; xp < dst.size(); ++xp)
    if (spec.psi[xp] >= 0) covered[spec.psi[xp]] = 1;
  for (int x = 0; x < src.size(); ++x)
    if (a[x] != 0.0 && !covered[x])
      throw std::invalid_argument("atom_to_ion: atom support overflows the chart patch");

  PushforwardResult out;
  out.H_used = spec.H;
  out.H_min = H_min;
  out.g = Field(dst);
  int c_dst = -1;
  for (int xp = 0; xp < dst.size(); ++xp) {
    int x = spec.psi[xp];
    if (x < 0) continue;
    if (x == B.center) c_dst = xp;
    double rho = src.weight(x) / dst.weight(xp);
    double mult = spec.multiplier ? (*spec.multiplier)[x] : 1.0;
    out.g[xp] = rho * mult * a[x] / spec.H;
  }
  if (c_dst < 0) throw std::invalid_argument("atom_to_ion: ball centre is outside the patch");
  out.ball = Ball{c_dst, spec.A * B.radius};
  return out;
}

// ---------------------------------------------------------------------------
// Computable h^1 surrogate: ||f||_1 + ||K* f||_1 for a certified AI.
// ---------------------------------------------------------------------------
struct HardyNormEstimate {
  double l1 = 0.0;
  double maximal_l1 = 0.0;
  double total = 0.0;
};

inline HardyNormEstimate hardy_norm_estimate(const Field& f, const Kernel& scaled_kernel) {
  HardyNormEstimate est;
  est.l1 = f.l1();
  est.maximal_l1 = radial_maximal(scaled_kernel, f).field.l1();
  est.total = est.l1 + est.maximal_l1;
  return est;
}

// ---------------------------------------------------------------------------
// Seeded random atoms. The ball centre, radius and value profile are drawn in
// resolution-independent coordinates so the same seed reproduces essentially
// the same atom on a refined grid.
// ---------------------------------------------------------------------------
struct AtomSample {
  Field a;
  Ball ball;
  std::string flavor;
};

inline AtomSample random_atom(const DiscreteSpace& space, const Rng& rng, std::uint64_t stream,
                              int index, double s, bool global, double r_floor) {
  AtomSample out;
  std::uint64_t base = static_cast<std::uint64_t>(index) * 64;
  std::vector<double> c(space.dimension());
  for (int a = 0; a < space.dimension(); ++a)
    c[a] = rng.uniform(stream, base + a, 0.0, space.extent());
  int center = space.nearest_to(c);
  double radius = global ? s : rng.log_uniform(stream, base + 8, r_floor, s);
  out.ball = Ball{center, radius};
  out.flavor = global ? "global" : "standard";

  out.a = Field(space);
  std::vector<int> pts = space.ball(center, radius);
  // smooth seeded profile on the ball, windowed to vanish at the rim
  for (int y : pts) {
    double u = space.dist(center, y) / radius;
    double v = 0.0;
    for (int k = 0; k < 4; ++k) {
      double coef = rng.uniform(stream, base + 16 + k, -1.0, 1.0);
      v += coef * std::cos((k + 0.5) * 3.14159265358979323846 * u);
    }
    out.a[y] = v * std::max(0.0, 1.0 - u);
  }
  if (!global) {
    double mB = 0.0, mean = 0.0;
    for (int y : pts) mB += space.weight(y);
    for (int y : pts) mean += out.a[y] * space.weight(y);
    mean /= mB;
    for (int y : pts) out.a[y] -= mean;
  }
  double sup = out.a.sup();
  if (sup <= 0.0) {
    for (int y : pts) out.a[y] = global ? 1.0 : 0.0;
    sup = out.a.sup();
    if (sup <= 0.0) return out;  // degenerate; caller skips
  }
  double mB = space.ball_measure(center, radius);
  double target = 0.995 / mB;
  for (int y : pts) out.a[y] *= target / sup;
  return out;
}

// ---------------------------------------------------------------------------
// Uniform-boundedness suite: ||K* a||_1 over random atoms, split into the 5B
// part and its complement; the complement is compared against the bound shape
//   C r_B^gamma int_{2 r_B}^{2 lambda} u^{-1-gamma} du,
// which is r_B-independent up to the fitted constant.
// ---------------------------------------------------------------------------
struct AtomSuiteRow {
  std::string flavor;
  double r_B = 0.0;
  double total = 0.0;
  double near = 0.0;   // L1 over 5B
  double far = 0.0;    // L1 over the complement
  double shape = 0.0;  // far / bound shape (standard atoms only)
};

struct AtomSuiteReport {
  std::vector<AtomSuiteRow> rows;
  double max_total_standard = 0.0;
  double max_total_global = 0.0;
  double fitted_shape_C = 0.0;
  int degenerate = 0;
};

inline AtomSuiteReport atom_maximal_suite(const Kernel& scaled_kernel, double lambda, int count,
                                          double s, const Rng& rng,
                                          const std::string& stream_tag = "atom-suite") {
  const DiscreteSpace& space = *scaled_kernel.space;
  AtomSuiteReport rep;
  std::uint64_t stream = Rng::stream_of(stream_tag);
  double r_floor = std::max(4.0 * space.spacing(), 1e-3);
  double gamma = scaled_kernel.gamma;

  for (int i = 0; i < count; ++i) {
    bool global = i % 2 == 1;
    AtomSample atom = random_atom(space, rng, stream, i, s, global, r_floor);
    if (atom.a.sup() <= 0.0) {
      ++rep.degenerate;
      continue;
    }
    MaximalResult mr = radial_maximal(scaled_kernel, atom.a);
    AtomSuiteRow row;
    row.flavor = atom.flavor;
    row.r_B = atom.ball.radius;
    for (int x = 0; x < space.size(); ++x) {
      double part = mr.field[x] * space.weight(x);
      row.total += part;
      if (space.dist(atom.ball.center, x) <= 5.0 * atom.ball.radius)
        row.near += part;
      else
        row.far += part;
    }
    if (!global) {
      double ub = 2.0 * lambda, lb = 2.0 * atom.ball.radius;
      double shape_integral =
          lb < ub ? (std::pow(lb, -gamma) - std::pow(ub, -gamma)) / gamma : 0.0;
      double bound_shape = std::pow(atom.ball.radius, gamma) * shape_integral;
      row.shape = bound_shape > 0.0 ? row.far / bound_shape : 0.0;
      rep.fitted_shape_C = std::max(rep.fitted_shape_C, row.shape);
      rep.max_total_standard = std::max(rep.max_total_standard, row.total);
    } else {
      rep.max_total_global = std::max(rep.max_total_global, row.total);
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace hardylab
