#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hardylab/common.hpp"
#include "hardylab/space.hpp"
#include "hardylab/subordinator.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Radial profiles for bump kernels and cutoff candidates.
// ---------------------------------------------------------------------------
struct Profile {
  std::string name;
  std::function<double(double)> psi;
  double gamma = 1.0;         // declared Hoelder exponent
  double holder_const = 1.0;  // declared Hoelder constant
  double support = 1.0;       // psi = 0 beyond this
  double psi0 = 1.0;

  double operator()(double u) const { return u >= support ? 0.0 : psi(u); }

  // max over a sample grid of |psi(u)-psi(v)| / |u-v|^g
  double sampled_holder(double g, int nodes = 512) const {
    double h = 0.0;
    double hi = support * 1.25;
    for (int i = 0; i < nodes; ++i) {
      double u = hi * i / (nodes - 1);
      double pu = (*this)(u);
      for (int j = i + 1; j < nodes; ++j) {
        double v = hi * j / (nodes - 1);
        h = std::max(h, std::abs(pu - (*this)(v)) / std::pow(v - u, g));
      }
    }
    return h;
  }
};

inline Profile triangle_profile() {
  return {"triangle", [](double u) { return std::max(0.0, 1.0 - u); }, 1.0, 1.0, 1.0, 1.0};
}

// 1 on [0,1/2], cubic taper to 0 at 1; integral strictly exceeds psi(0)
inline Profile plateau_profile() {
  return {"plateau",
          [](double u) {
            if (u <= 0.5) return 1.0;
            if (u >= 1.0) return 0.0;
            double w = (u - 0.5) * 2.0;
            return 1.0 - w * w * (3.0 - 2.0 * w);
          },
          1.0, 3.0, 1.0, 1.0};
}

inline Profile cosine_profile() {
  return {"cosine",
          [](double u) { return u >= 1.0 ? 0.0 : 0.5 * (1.0 + std::cos(3.14159265358979323846 * u)); },
          1.0, 1.5707963267948966, 1.0, 1.0};
}

// (1-u)_+^g, g-Hoelder with constant 1
inline Profile power_profile(double g) {
  Profile p;
  p.name = "power";
  p.gamma = g;
  p.holder_const = 1.0;
  p.support = 1.0;
  p.psi0 = 1.0;
  p.psi = [g](double u) { return u >= 1.0 ? 0.0 : std::pow(1.0 - u, g); };
  return p;
}

inline Profile scaled_profile(const Profile& p, double radius) {
  Profile q = p;
  q.name = p.name + "@" + std::to_string(radius);
  q.support = p.support * radius;
  q.holder_const = p.holder_const / std::pow(radius, p.gamma);
  auto base = p.psi;
  double sup = p.support;
  q.psi = [base, radius, sup](double u) { return u / radius >= sup ? 0.0 : base(u / radius); };
  return q;
}

inline Profile named_profile(const std::string& name, double gamma = 1.0) {
  if (name == "triangle") return triangle_profile();
  if (name == "plateau") return plateau_profile();
  if (name == "cosine") return cosine_profile();
  if (name == "power") return power_profile(gamma);
  throw std::invalid_argument("unknown profile: " + name);
}

// ---------------------------------------------------------------------------
// Kernel: an evaluable K(t,x,y), t in (0,1], bound to one space.
// support_radius(t) is an upper bound for the d(x,y) past which K vanishes;
// it only gates loops, never values.
// ---------------------------------------------------------------------------
struct Kernel {
  std::string kind;
  const DiscreteSpace* space = nullptr;
  double gamma = 1.0;
  double lambda = kInf;
  std::function<double(double, int, int)> eval;
  std::function<double(double)> support_radius;

  double operator()(double t, int x, int y) const { return eval(t, x, y); }

  double support_at(double t) const { return support_radius ? support_radius(t) : lambda; }

  Kernel scaled(double s) const {
    Kernel k = *this;
    k.kind = kind + "*" + std::to_string(s);
    auto base = eval;
    k.eval = [base, s](double t, int x, int y) { return s * base(t, x, y); };
    return k;
  }
};

// ---------------------------------------------------------------------------
// Flat-torus heat kernel in its native time parameter, via the image sum
//   h_s(x,y) = prod_axis sum_k (4 pi s)^{-1/2} exp(-(delta + k L)^2 / (4 s)),
// truncated once terms drop below 1e-18 of the running sum.
// ---------------------------------------------------------------------------
class TorusHeat {
public:
  explicit TorusHeat(const DiscreteSpace& torus) : space_(&torus) {
    if (torus.topology() != Topology::torus)
      throw std::invalid_argument("TorusHeat: torus space required");
  }

  const DiscreteSpace& space() const { return *space_; }

  double theta(double s, double delta, double period) const {
    double pref = 1.0 / std::sqrt(4.0 * 3.14159265358979323846 * s);
    double acc = pref * std::exp(-delta * delta / (4.0 * s));
    for (int k = 1; k < 512; ++k) {
      double a = delta + k * period;
      double b = delta - k * period;
      double term = pref * (std::exp(-a * a / (4.0 * s)) + std::exp(-b * b / (4.0 * s)));
      acc += term;
      if (term < 1e-18 * acc) break;
    }
    return acc;
  }

  double operator()(double s, int x, int y) const {
    double v = 1.0;
    for (int a = 0; a < space_->dimension(); ++a)
      v *= theta(s, space_->delta(x, y, a), space_->extent());
    return v;
  }

private:
  const DiscreteSpace* space_;
};

// ---------------------------------------------------------------------------
// Kernel constructors.
// ---------------------------------------------------------------------------
inline Kernel make_bump_kernel(const DiscreteSpace& space, const Profile& profile) {
  // reject profiles whose sampled Hoelder quotient exceeds the declared constant
  double sampled = profile.sampled_holder(profile.gamma, 256);
  if (sampled > profile.holder_const * (1.0 + 1e-6))
    throw std::invalid_argument("make_bump_kernel: profile is not " + std::to_string(profile.gamma) +
                                "-Hoelder with its declared constant (sampled " +
                                std::to_string(sampled) + ")");
  if (!(profile.psi0 > 0.0)) throw std::invalid_argument("make_bump_kernel: psi(0) must be positive");
  Kernel k;
  k.kind = "bump:" + profile.name;
  k.space = &space;
  k.gamma = profile.gamma;
  k.lambda = profile.support;
  const int D = space.dimension();
  Profile p = profile;
  const DiscreteSpace* sp = &space;
  k.eval = [p, D, sp](double t, int x, int y) {
    return std::pow(t, -D) * p(sp->dist(x, y) / t);
  };
  double supp = profile.support;
  k.support_radius = [supp](double t) { return supp * t; };
  return k;
}

inline Kernel make_poisson_model(const DiscreteSpace& space) {
  Kernel k;
  k.kind = "poisson_model";
  k.space = &space;
  k.gamma = 1.0;
  k.lambda = kInf;
  const int D = space.dimension();
  const DiscreteSpace* sp = &space;
  k.eval = [D, sp](double t, int x, int y) {
    double d = sp->dist(x, y);
    return t * std::pow(t * t + d * d, -0.5 * (D + 1));
  };
  k.support_radius = [](double) { return kInf; };
  return k;
}

// heat AI: t -> h_{t^2}
inline Kernel make_heat_torus(const DiscreteSpace& space) {
  auto heat = std::make_shared<TorusHeat>(space);
  Kernel k;
  k.kind = "heat_torus";
  k.space = &space;
  k.gamma = 1.0;
  k.lambda = kInf;
  k.eval = [heat](double t, int x, int y) { return (*heat)(t * t, x, y); };
  k.support_radius = [](double) { return kInf; };
  return k;
}

// subordinated semigroup: t -> p^alpha_{t^{2 alpha}} = int F_alpha(s/t^2) h_s ds/s
inline Kernel make_subordinated(const DiscreteSpace& space, double alpha,
                                std::shared_ptr<const Subordinator> sub, int nodes = 400) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("make_subordinated: alpha must be in (0,1)");
  if (!sub || std::abs(sub->alpha() - alpha) > 1e-12)
    throw std::invalid_argument("make_subordinated: subordinator/alpha mismatch");
  auto heat = std::make_shared<TorusHeat>(space);
  Kernel k;
  k.kind = "subordinated:" + std::to_string(alpha);
  k.space = &space;
  k.gamma = std::min(1.0, 2.0 * alpha);
  k.lambda = kInf;
  k.eval = [heat, sub, nodes](double t, int x, int y) {
    // log-trapezoid on s in [1e-4 t^2, 1e4]
    double lo = std::log(1e-4 * t * t), hi = std::log(1e4);
    double du = (hi - lo) / (nodes - 1);
    double acc = 0.0;
    for (int i = 0; i < nodes; ++i) {
      double s = std::exp(lo + i * du);
      double w = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
      acc += w * sub->density(s / (t * t)) * (*heat)(s, x, y);
    }
    return acc * du;
  };
  k.support_radius = [](double) { return kInf; };
  return k;
}

inline Kernel make_explicit_kernel(const DiscreteSpace& space,
                                   std::function<double(double, int, int)> fn, double gamma,
                                   double lambda) {
  Kernel k;
  k.kind = "explicit";
  k.space = &space;
  k.gamma = gamma;
  k.lambda = lambda;
  k.eval = std::move(fn);
  double lam = lambda;
  k.support_radius = [lam](double) { return lam; };
  return k;
}

// ---------------------------------------------------------------------------
// LAI / AI certification.
//
// Measures the raw constants C1 (upper decay), C2 (on-diagonal lower bound)
// and C3 (Hoelder in the second space variable, sampled in the range
// 4 d(y,z) <= t + d(x,y)) over a sampled (t,x,y,z) set, then fits the largest
// scale so that scale*K obeys the unit-constant bounds; c = scale * C2.
// Certification requires c in (0,1) and, for finite lambda, a clean support
// condition.
// ---------------------------------------------------------------------------
struct SampleBudget {
  int max_centers = 96;
  int max_partners = 256;
  int z_per_pair = 3;
  int neighbor_k = 6;
  double t_min = 0.0;  // 0 -> 2 * spacing
  std::uint64_t seed = 2026;
};

struct FittedConstants {
  double C1 = 0.0, C2 = kInf, C3 = 0.0;
  double scale = 0.0;
  double c = 0.0;
  double gamma = 1.0, lambda = kInf, D = 1.0;
  bool certified = false;
  bool support_ok = true;
  std::map<std::string, double> margins;
  std::vector<std::string> witnesses;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<int> strided_subset(int n, int cap) {
  std::vector<int> out;
  int stride = n <= cap ? 1 : (n + cap - 1) / cap;
  for (int i = 0; i < n; i += stride) out.push_back(i);
  return out;
}

inline std::vector<std::vector<int>> nearest_neighbors(const DiscreteSpace& s,
                                                       const std::vector<int>& pts, int k) {
  std::vector<std::vector<int>> out(pts.size());
  parallel_for(pts.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      int y = pts[i];
      std::vector<std::pair<double, int>> best;
      for (int z = 0; z < s.size(); ++z) {
        if (z == y) continue;
        double d = s.dist(y, z);
        if (static_cast<int>(best.size()) < k) {
          best.emplace_back(d, z);
          std::push_heap(best.begin(), best.end());
        } else if (d < best.front().first) {
          std::pop_heap(best.begin(), best.end());
          best.back() = {d, z};
          std::push_heap(best.begin(), best.end());
        }
      }
      std::sort(best.begin(), best.end());
      for (auto& p : best) out[i].push_back(p.second);
    }
  });
  return out;
}

}  // namespace detail

inline FittedConstants verify_lai(const Kernel& kernel, const DiscreteSpace& space, double gamma,
                                  double lambda, SampleBudget budget = SampleBudget{}) {
  FittedConstants fit;
  fit.gamma = gamma;
  fit.lambda = lambda;
  fit.D = space.dimension();
  const double D = fit.D;
  const int n = space.size();

  double t_lo = budget.t_min > 0.0 ? budget.t_min : 2.0 * space.spacing();
  if (t_lo < 2.0 * space.spacing())
    fit.warnings.push_back("t_min below resolution (t_min < 2*spacing)");
  t_lo = std::min(t_lo, 1.0);
  std::vector<double> t_grid = geometric_grid(t_lo, 1.0, kGridRatio);

  std::vector<int> centers = detail::strided_subset(n, budget.max_centers);
  std::vector<int> partners = detail::strided_subset(n, budget.max_partners);
  auto neighbors = detail::nearest_neighbors(space, partners, budget.neighbor_k);
  Rng rng(budget.seed);

  struct Acc {
    RunningMax upper, holder, support_viol;
    double diag_min = kInf;
    std::string diag_witness;
  };

  Acc acc = parallel_reduce<Acc>(
      centers.size(), Acc{},
      [&](std::size_t b, std::size_t e, Acc a) {
        for (std::size_t ci = b; ci < e; ++ci) {
          int x = centers[ci];
          for (double t : t_grid) {
            // diagonal lower bound
            double diag = std::pow(t, D) * kernel(t, x, x);
            if (diag < a.diag_min) {
              a.diag_min = diag;
              a.diag_witness = "t=" + std::to_string(t) + " x=" + std::to_string(x);
            }
            for (std::size_t pi = 0; pi < partners.size(); ++pi) {
              int y = partners[pi];
              double d = space.dist(x, y);
              double K = kernel(t, x, y);
              if (std::isfinite(lambda) && d > lambda && K > 1e-300) {
                a.support_viol.offer(K, "t=" + std::to_string(t) + " x=" + std::to_string(x) +
                                            " y=" + std::to_string(y));
              }
              double up = K * std::pow(t, D) * std::pow(1.0 + d / t, D + gamma);
              a.upper.offer(up, "t=" + std::to_string(t) + " x=" + std::to_string(x) +
                                    " y=" + std::to_string(y));
              // Hoelder samples in the admissible range
              auto probe = [&](int z) {
                if (z == y) return;
                double dyz = space.dist(y, z);
                if (dyz <= 0.0 || 4.0 * dyz > t + d) return;
                double dK = std::abs(K - kernel(t, x, z));
                double ratio = dK * std::pow(t, D) * std::pow(t / dyz, gamma) *
                               std::pow(1.0 + d / t, D + 2.0 * gamma);
                a.holder.offer(ratio, "t=" + std::to_string(t) + " x=" + std::to_string(x) +
                                          " y=" + std::to_string(y) + " z=" + std::to_string(z));
              };
              for (int z : neighbors[pi]) probe(z);
              for (int r = 0; r < budget.z_per_pair; ++r) {
                std::uint64_t ctr = ((ci * 7919 + pi) * 131 + static_cast<std::uint64_t>(r)) * 17 +
                                    static_cast<std::uint64_t>(t * 4096);
                probe(rng.uniform_int(11, ctr, n));
              }
            }
          }
        }
        return a;
      },
      [](Acc a, const Acc& b) {
        a.upper = RunningMax::merge(a.upper, b.upper);
        a.holder = RunningMax::merge(a.holder, b.holder);
        a.support_viol = RunningMax::merge(a.support_viol, b.support_viol);
        if (b.diag_min < a.diag_min) {
          a.diag_min = b.diag_min;
          a.diag_witness = b.diag_witness;
        }
        return a;
      });

  fit.C1 = std::max(0.0, acc.upper.value);
  fit.C2 = acc.diag_min;
  fit.C3 = std::max(0.0, acc.holder.value);
  fit.support_ok = !(acc.support_viol.value > 0.0);
  if (!fit.support_ok)
    fit.witnesses.push_back("support violation at " + acc.support_viol.witness);
  if (!acc.upper.witness.empty()) fit.witnesses.push_back("C1 at " + acc.upper.witness);
  if (!acc.diag_witness.empty()) fit.witnesses.push_back("C2 at " + acc.diag_witness);
  if (!acc.holder.witness.empty()) fit.witnesses.push_back("C3 at " + acc.holder.witness);

  double cap = std::max(fit.C1, fit.C3);
  fit.scale = cap > 0.0 ? 1.0 / cap : 0.0;
  fit.c = fit.scale * (std::isfinite(fit.C2) ? fit.C2 : 0.0);
  fit.margins["upper"] = fit.scale * fit.C1;
  fit.margins["holder"] = fit.scale * fit.C3;
  fit.margins["lower_c"] = fit.c;
  fit.margins["support"] = fit.support_ok ? 0.0 : 1.0;
  fit.certified = fit.support_ok && fit.c > 0.0 && fit.c < 1.0 && fit.scale > 0.0 &&
                  fit.margins["upper"] <= 1.0 + 1e-9 && fit.margins["holder"] <= 1.0 + 1e-9;
  return fit;
}

// ---------------------------------------------------------------------------
// AI splitting: K = local + tail with the local part supported within lambda
// of the diagonal. tail_norm is the uniform-integrability constant
// sup_y int sup_t |tail(t,x,y)| dm(x).
// ---------------------------------------------------------------------------
struct SplitKernel {
  Kernel local;
  Kernel tail;
  double tail_norm = 0.0;
  std::vector<double> per_t_sup;  // sup_y int |tail(t,.,y)| dm, per t-grid node
};

inline SplitKernel split_ai(const Kernel& kernel, double lambda) {
  const DiscreteSpace& space = *kernel.space;
  if (!(lambda >= 4.0 * space.spacing()))
    throw std::invalid_argument("split_ai: lambda below resolution (need >= 4*spacing)");

  auto transition = [lambda](double d) {
    return detail::smooth_step_down(d, 0.5 * lambda, lambda);
  };

  SplitKernel out;
  out.local = kernel;
  out.local.kind = kernel.kind + ":local";
  out.local.lambda = lambda;
  {
    auto base = kernel.eval;
    const DiscreteSpace* sp = kernel.space;
    out.local.eval = [base, transition, sp](double t, int x, int y) {
      double d = sp->dist(x, y);
      double f = transition(d);
      return f > 0.0 ? f * base(t, x, y) : 0.0;
    };
    auto base_supp = kernel.support_radius;
    double lam = lambda;
    out.local.support_radius = [base_supp, lam](double t) {
      return std::min(lam, base_supp ? base_supp(t) : kInf);
    };
  }
  out.tail = kernel;
  out.tail.kind = kernel.kind + ":tail";
  {
    auto base = kernel.eval;
    const DiscreteSpace* sp = kernel.space;
    out.tail.eval = [base, transition, sp](double t, int x, int y) {
      double f = 1.0 - transition(sp->dist(x, y));
      return f > 0.0 ? f * base(t, x, y) : 0.0;
    };
  }

  std::vector<double> t_grid = geometric_grid(std::min(1.0, 2.0 * space.spacing()), 1.0, kGridRatio);
  std::vector<int> ys = detail::strided_subset(space.size(), 64);

  // per-t sup_y of the tail L1 mass, to expose divergence trends as t -> 0
  out.per_t_sup.assign(t_grid.size(), 0.0);
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    double worst = 0.0;
    for (int y : ys) {
      double acc = 0.0;
      for (int x = 0; x < space.size(); ++x)
        acc += std::abs(out.tail(t_grid[ti], x, y)) * space.weight(x);
      worst = std::max(worst, acc);
    }
    out.per_t_sup[ti] = worst;
  }
  double mid = out.per_t_sup[out.per_t_sup.size() / 2];
  if (mid > 0.0 && out.per_t_sup.front() > 4.0 * mid) {
    std::ostringstream os;
    os << "split_ai: tail mass grows toward t_min (";
    for (std::size_t i = 0; i < std::min<std::size_t>(4, out.per_t_sup.size()); ++i)
      os << out.per_t_sup[i] << " ";
    os << "... vs mid " << mid << ")";
    throw std::runtime_error(os.str());
  }

  // the actual uniform bound: integral of sup_t, not sup_t of integral
  double tail_norm = 0.0;
  for (int y : ys) {
    double acc = 0.0;
    for (int x = 0; x < space.size(); ++x) {
      double m = 0.0;
      for (double t : t_grid) m = std::max(m, std::abs(out.tail(t, x, y)));
      acc += m * space.weight(x);
    }
    tail_norm = std::max(tail_norm, acc);
  }
  out.tail_norm = tail_norm;
  return out;
}

// ---------------------------------------------------------------------------
// Charts: a bi-Lipschitz identification of a source patch with a coordinate
// patch of a target lattice, plus the product cutoff and the reference LAI
// used to glue kernels across the patch boundary.
// ---------------------------------------------------------------------------
struct Chart {
  const DiscreteSpace* source = nullptr;
  const DiscreteSpace* target = nullptr;
  std::vector<int> fwd;  // source -> target (or -1)
  std::vector<int> inv;  // target -> source (or -1)
  double Q = 1.0;
  double R0 = 1.0;
  int center = 0;        // p in the source
  int target_origin = 0; // image of p
  Field chi;             // cutoff on the target, supported in B(0, R0/(2Q))
  double bilip_worst = 1.0;

  double xi(int X, int Y) const { return chi[X] * chi[Y]; }
};

// X = Q * (x - p), with torus differences wrapped; every mapped source point
// must land exactly on a target node.
inline Chart make_lattice_chart(const DiscreteSpace& source, const DiscreteSpace& target, int p,
                                double R0, double Q) {
  if (!(Q >= 1.0)) throw std::invalid_argument("make_lattice_chart: Q must be >= 1");
  Chart ch;
  ch.source = &source;
  ch.target = &target;
  ch.center = p;
  ch.R0 = R0;
  ch.Q = Q;
  ch.fwd.assign(source.size(), -1);
  ch.inv.assign(target.size(), -1);
  std::vector<double> zero(target.dimension(), 0.0);
  ch.target_origin = target.nearest_to(zero);

  for (int i = 0; i < source.size(); ++i) {
    if (source.dist(p, i) >= R0) continue;
    std::vector<double> X(source.dimension());
    for (int a = 0; a < source.dimension(); ++a) X[a] = Q * source.delta(i, p, a);
    int j = target.nearest_to(X);
    double err = 0.0;
    for (int a = 0; a < target.dimension(); ++a) err += sq(target.coord(j, a) - X[a]);
    if (std::sqrt(err) > 1e-9)
      throw std::invalid_argument("make_lattice_chart: patch point misses the target lattice");
    ch.fwd[i] = j;
    ch.inv[j] = i;
  }

  // sampled bi-Lipschitz audit
  std::vector<int> patch;
  for (int i = 0; i < source.size(); ++i)
    if (ch.fwd[i] >= 0) patch.push_back(i);
  double worst = 1.0;
  int stride = std::max<std::size_t>(1, patch.size() / 64);
  for (std::size_t a = 0; a < patch.size(); a += stride) {
    for (std::size_t b = a + 1; b < patch.size(); b += stride) {
      double ds = source.dist(patch[a], patch[b]);
      double dt = target.dist(ch.fwd[patch[a]], ch.fwd[patch[b]]);
      if (ds <= 0.0) continue;
      double hi = dt / ds;
      worst = std::max({worst, hi, 1.0 / hi});
    }
  }
  ch.bilip_worst = worst;
  if (worst > Q * (1.0 + 1e-9))
    throw std::invalid_argument("make_lattice_chart: sampled bi-Lipschitz ratio " +
                                std::to_string(worst) + " exceeds declared Q");

  // chi: 1 on (1/2) Bball, 0 outside Bball = B(0, R0/(2Q))
  ch.chi = Field(target);
  for (int X = 0; X < target.size(); ++X) {
    double r = target.dist(ch.target_origin, X);
    ch.chi[X] = detail::smooth_step_down(r, R0 / (4.0 * Q), R0 / (2.0 * Q));
  }
  return ch;
}

// reference LAI on the target: S(t,X,Y) = t^-D zeta(|X-Y|/t), with zeta
// Lipschitz-1, zeta(0) = R0/(2Q) > 0, supported in [0, R0/Q]
inline Kernel make_reference_lai(const DiscreteSpace& target, double R0, double Q, double gamma) {
  Kernel k;
  k.kind = "reference_lai";
  k.space = &target;
  k.gamma = gamma;
  k.lambda = R0 / Q;
  const int D = target.dimension();
  double supp = R0 / Q;
  double cap = R0 / (2.0 * Q);
  const DiscreteSpace* sp = &target;
  k.eval = [D, supp, cap, sp](double t, int x, int y) {
    double u = sp->dist(x, y) / t;
    double z = std::min(cap, std::max(0.0, supp - u));
    return std::pow(t, -D) * z;
  };
  k.support_radius = [supp](double t) { return supp * t; };
  return k;
}

// K#(t,X,Y) = Xi(X,Y) K(t, eta^-1 X, eta^-1 Y) + (1 - Xi(X,Y)) S(t,X,Y)
inline Kernel glue_kernel(const Kernel& kernel, const Chart& chart) {
  if (kernel.space != chart.source)
    throw std::invalid_argument("glue_kernel: kernel is not bound to the chart source");
  Kernel s_ref = make_reference_lai(*chart.target, chart.R0, chart.Q, kernel.gamma);
  Kernel out;
  out.kind = "glued:" + kernel.kind;
  out.space = chart.target;
  out.gamma = kernel.gamma;
  out.lambda = chart.R0 / chart.Q;
  Kernel base = kernel;
  Chart ch = chart;
  out.eval = [base, ch, s_ref](double t, int X, int Y) {
    double xi = ch.xi(X, Y);
    double sval = xi < 1.0 ? s_ref(t, X, Y) : 0.0;
    if (xi <= 0.0) return sval;
    int x = ch.inv[X], y = ch.inv[Y];
    if (x < 0 || y < 0) return (1.0 - xi) * sval;  // chi vanishes off the patch image
    return xi * base(t, x, y) + (1.0 - xi) * sval;
  };
  double lam = out.lambda;
  out.support_radius = [lam](double) { return lam; };
  return out;
}

}  // namespace hardylab
