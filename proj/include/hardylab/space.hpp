#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hardylab/common.hpp"

namespace hardylab {

enum class Topology { grid, torus, explicit_table };

inline std::string topology_name(Topology t) {
  switch (t) {
    case Topology::grid: return "grid";
    case Topology::torus: return "torus";
    default: return "explicit-table";
  }
}

// ---------------------------------------------------------------------------
// A finite metric measure space: points with a symmetric distance and strictly
// positive weights. Grid and torus spaces use the closed-form metric and cell
// volume weights; explicit-table spaces carry their data verbatim.
// Immutable after construction.
// ---------------------------------------------------------------------------
class DiscreteSpace {
public:
  static DiscreteSpace grid(int dim, double extent, double spacing) {
    check_lattice_args(dim, extent, spacing);
    DiscreteSpace s;
    s.topology_ = Topology::grid;
    s.dim_ = dim;
    s.spacing_ = spacing;
    s.extent_ = extent;
    int per_axis = static_cast<int>(std::llround(extent / spacing)) + 1;
    s.shape_.assign(dim, per_axis);
    s.init_lattice();
    return s;
  }

  static DiscreteSpace torus(int dim, double period, double spacing) {
    check_lattice_args(dim, period, spacing);
    DiscreteSpace s;
    s.topology_ = Topology::torus;
    s.dim_ = dim;
    s.spacing_ = spacing;
    s.extent_ = period;
    int per_axis = static_cast<int>(std::llround(period / spacing));
    if (per_axis < 2) throw std::invalid_argument("torus: fewer than 2 points per axis");
    s.shape_.assign(dim, per_axis);
    s.init_lattice();
    return s;
  }

  // grid on [lo, lo+extent]^dim (grids are [0,extent]^dim by default)
  static DiscreteSpace grid_at(int dim, double lo, double extent, double spacing) {
    DiscreteSpace s = grid(dim, extent, spacing);
    s.origin_.assign(dim, lo);
    return s;
  }

  static DiscreteSpace from_table(const std::vector<std::vector<double>>& coords,
                                  const std::vector<double>& weights,
                                  const std::vector<std::vector<double>>* dist = nullptr) {
    DiscreteSpace s;
    s.topology_ = Topology::explicit_table;
    s.n_ = static_cast<int>(weights.size());
    if (s.n_ == 0) throw std::invalid_argument("explicit space: no points");
    s.dim_ = coords.empty() ? 1 : static_cast<int>(coords[0].size());
    for (double w : weights)
      if (!(w > 0.0)) throw std::invalid_argument("explicit space: weights must be positive");
    s.weights_ = weights;
    if (!coords.empty()) {
      if (static_cast<int>(coords.size()) != s.n_)
        throw std::invalid_argument("explicit space: coords/weights size mismatch");
      s.coords_.resize(static_cast<std::size_t>(s.n_) * s.dim_);
      for (int i = 0; i < s.n_; ++i)
        for (int a = 0; a < s.dim_; ++a) s.coords_[i * s.dim_ + a] = coords[i][a];
    }
    if (dist) {
      s.dist_table_.emplace(static_cast<std::size_t>(s.n_) * s.n_, 0.0);
      for (int i = 0; i < s.n_; ++i) {
        for (int j = 0; j < s.n_; ++j) {
          double dij = (*dist)[i][j];
          double dji = (*dist)[j][i];
          if (std::abs(dij - dji) > 1e-12 * (1.0 + std::abs(dij)))
            throw std::invalid_argument("explicit space: asymmetric distance table");
          if (i == j && dij != 0.0)
            throw std::invalid_argument("explicit space: nonzero diagonal distance");
          if (i != j && !(dij > 0.0))
            throw std::invalid_argument("explicit space: zero distance between distinct points");
          (*s.dist_table_)[i * s.n_ + j] = dij;
        }
      }
    } else if (coords.empty()) {
      throw std::invalid_argument("explicit space: need coords or a distance table");
    }
    s.finish_setup();
    return s;
  }

  int size() const { return n_; }
  int dimension() const { return dim_; }
  double spacing() const { return spacing_; }
  double extent() const { return extent_; }
  Topology topology() const { return topology_; }
  double weight(int i) const { return weights_[i]; }
  double total_measure() const { return total_measure_; }
  double diameter() const { return diameter_; }

  double coord(int i, int axis) const {
    if (!coords_.empty()) return coords_[i * dim_ + axis];
    int idx = i;
    for (int a = dim_ - 1; a > axis; --a) idx /= shape_[a];
    double base = origin_.empty() ? 0.0 : origin_[axis];
    return base + spacing_ * (idx % shape_[axis]);
  }

  // coordinate difference along one axis (torus: wrapped representative)
  double delta(int i, int j, int axis) const {
    double d = coord(i, axis) - coord(j, axis);
    if (topology_ == Topology::torus) {
      d = std::fmod(d, extent_);
      if (d > 0.5 * extent_) d -= extent_;
      if (d < -0.5 * extent_) d += extent_;
    }
    return d;
  }

  double dist(int i, int j) const {
    if (i == j) return 0.0;
    if (dist_table_) return (*dist_table_)[i * n_ + j];
    double s2 = 0.0;
    for (int a = 0; a < dim_; ++a) s2 += sq(delta(i, j, a));
    return std::sqrt(s2);
  }

  // closed ball
  std::vector<int> ball(int center, double r) const {
    std::vector<int> out;
    for (int j = 0; j < n_; ++j)
      if (dist(center, j) <= r) out.push_back(j);
    return out;
  }

  double ball_measure(int center, double r) const {
    double m = 0.0;
    for (int j = 0; j < n_; ++j)
      if (dist(center, j) <= r) m += weights_[j];
    return m;
  }

  int nearest_to_origin() const {
    int best = 0;
    double bd = kInf;
    for (int i = 0; i < n_; ++i) {
      double s2 = 0.0;
      for (int a = 0; a < dim_; ++a) s2 += sq(coord(i, a));
      if (s2 < bd) {
        bd = s2;
        best = i;
      }
    }
    return best;
  }

  int nearest_to(const std::vector<double>& pt) const {
    int best = 0;
    double bd = kInf;
    for (int i = 0; i < n_; ++i) {
      double s2 = 0.0;
      for (int a = 0; a < dim_ && a < static_cast<int>(pt.size()); ++a)
        s2 += sq(coord(i, a) - pt[a]);
      if (s2 < bd) {
        bd = s2;
        best = i;
      }
    }
    return best;
  }

private:
  static void check_lattice_args(int dim, double extent, double spacing) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
    if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be positive");
    if (!(extent > spacing)) throw std::invalid_argument("extent must exceed spacing");
  }

  void init_lattice() {
    n_ = 1;
    for (int a = 0; a < dim_; ++a) n_ *= shape_[a];
    double cell = std::pow(spacing_, dim_);
    weights_.assign(n_, cell);
    finish_setup();
  }

  void finish_setup() {
    total_measure_ = 0.0;
    for (double w : weights_) total_measure_ += w;
    if (topology_ == Topology::torus) {
      double s2 = 0.0;
      for (int a = 0; a < dim_; ++a) s2 += sq(0.5 * extent_);
      diameter_ = std::sqrt(s2);
    } else if (topology_ == Topology::grid) {
      diameter_ = extent_ * std::sqrt(static_cast<double>(dim_));
    } else {
      double d = 0.0;
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) d = std::max(d, dist(i, j));
      diameter_ = d;
      // resolution proxy for tables: smallest positive pairwise distance
      double m = kInf;
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) m = std::min(m, dist(i, j));
      spacing_ = n_ > 1 ? m : 0.0;
    }
  }

  Topology topology_ = Topology::grid;
  int dim_ = 1;
  int n_ = 0;
  double spacing_ = 0.0;
  double extent_ = 0.0;
  std::vector<int> shape_;
  std::vector<double> origin_;
  std::vector<double> coords_;
  std::vector<double> weights_;
  std::optional<std::vector<double>> dist_table_;
  double total_measure_ = 0.0;
  double diameter_ = 0.0;
};

// ---------------------------------------------------------------------------
// Field: one real value per point.
// ---------------------------------------------------------------------------
struct Field {
  const DiscreteSpace* space = nullptr;
  std::vector<double> v;

  Field() = default;
  explicit Field(const DiscreteSpace& s, double fill = 0.0)
      : space(&s), v(static_cast<std::size_t>(s.size()), fill) {}

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  int size() const { return static_cast<int>(v.size()); }

  double integral() const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += v[i] * space->weight(i);
    return s;
  }
  double l1() const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += std::abs(v[i]) * space->weight(i);
    return s;
  }
  double lp(double p) const {
    if (std::isinf(p)) return sup();
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += std::pow(std::abs(v[i]), p) * space->weight(i);
    return std::pow(s, 1.0 / p);
  }
  double sup() const {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
  }
};

// session base distance d(x) = 1 + dist(o, x)
struct BaseDistance {
  const DiscreteSpace* space = nullptr;
  int o = 0;

  BaseDistance() = default;
  BaseDistance(const DiscreteSpace& s, int basepoint) : space(&s), o(basepoint) {}
  double operator()(int x) const { return 1.0 + space->dist(o, x); }
};

// ---------------------------------------------------------------------------
// Ahlfors regularity scan: fit the smallest A with A^-1 r^D <= m(B(x,r)) <= A r^D
// over sampled centres and radii. A space is certified when the fitted A stays
// below the acceptance cap.
// ---------------------------------------------------------------------------
struct AhlforsReport {
  double fitted_A = 1.0;
  double worst_ratio_low = 0.0;   // max over samples of r^D / m(B)  (lower-bound side)
  double worst_ratio_high = 0.0;  // max over samples of m(B) / r^D  (upper-bound side)
  bool certified = false;
  double a_max = 0.0;
  double D = 0.0;
  struct Violation {
    int center;
    double radius;
    double measure;
    std::string side;
  };
  std::vector<Violation> violations;
  std::vector<std::string> warnings;
};

inline std::vector<double> ahlfors_radius_grid(double r_lo, double r_hi) {
  return geometric_grid(r_lo, r_hi, std::pow(2.0, 0.25));
}

inline AhlforsReport verify_ahlfors(const DiscreteSpace& space, double D,
                                    const std::vector<double>& radii, double a_max = 50.0) {
  AhlforsReport rep;
  rep.D = D;
  rep.a_max = a_max;
  const int n = space.size();
  // all centres up to 2000 points, then a deterministic stride subsample
  int stride = n <= 2000 ? 1 : (n + 1999) / 2000;
  std::vector<int> centers;
  for (int i = 0; i < n; i += stride) centers.push_back(i);

  for (double r : radii) {
    if (r <= 2.0 * space.spacing())
      rep.warnings.push_back("radius " + std::to_string(r) + " below resolution");
  }

  struct Acc {
    double lo = 0.0, hi = 0.0;
    std::vector<AhlforsReport::Violation> viol;
  };
  Acc acc = parallel_reduce<Acc>(
      centers.size(), Acc{},
      [&](std::size_t b, std::size_t e, Acc a) {
        for (std::size_t k = b; k < e; ++k) {
          int x = centers[k];
          for (double r : radii) {
            double m = space.ball_measure(x, r);
            double rd = std::pow(r, D);
            if (m <= 0.0) {
              a.viol.push_back({x, r, m, "empty-ball"});
              continue;
            }
            double lo = rd / m, hi = m / rd;
            a.lo = std::max(a.lo, lo);
            a.hi = std::max(a.hi, hi);
            if (lo > a_max) a.viol.push_back({x, r, m, "lower"});
            if (hi > a_max) a.viol.push_back({x, r, m, "upper"});
          }
        }
        return a;
      },
      [](Acc a, const Acc& b) {
        a.lo = std::max(a.lo, b.lo);
        a.hi = std::max(a.hi, b.hi);
        a.viol.insert(a.viol.end(), b.viol.begin(), b.viol.end());
        return a;
      });

  rep.worst_ratio_low = acc.lo;
  rep.worst_ratio_high = acc.hi;
  rep.fitted_A = std::max(1.0, std::max(acc.lo, acc.hi));
  rep.violations = std::move(acc.viol);
  rep.certified = rep.violations.empty() && rep.fitted_A <= a_max;
  return rep;
}

// ---------------------------------------------------------------------------
// Maximal net at scale t: greedy maximal separated set in {y : t d(y) <= 1/2}
// under d(y_j,y_k) >= a t min{d(y_j),d(y_k)}/4, then per-centre selection of a
// representative whose g-value is at most twice the small-ball average.
// ---------------------------------------------------------------------------
struct Net {
  std::vector<int> centers;   // x_j
  double t = 0.0;             // scale
  double a = 1.0;             // cover parameter
  int basepoint = 0;
  int overlap_bound = 0;      // realized sup_x #{j : x in B(x_j, t d(x_j))}
  double average_constant = 1.0;  // realized max of g(x_j) / avg_{B(x_j, t d(x_j))} g
};

struct NetAudit {
  bool times_ok = true;      // t d(x_j) <= 1
  bool cover_ok = true;      // every x with t d(x) <= 1/2 in some B(x_j, a t d(x_j))
  bool overlap_ok = true;    // overlap finite (always true; bound reported)
  bool average_ok = true;    // g(x_j) <= C avg, with C = net.average_constant
  int uncovered = -1;
};

inline Net maximal_net(const DiscreteSpace& space, int basepoint, double t, double a,
                       const Field& g) {
  if (!(t > 0.0) || t > 0.5) throw std::invalid_argument("maximal_net: need t in (0, 1/2]");
  if (!(a > 0.0) || a > 1.0) throw std::invalid_argument("maximal_net: need a in (0, 1]");
  for (double gv : g.v)
    if (gv < 0.0) throw std::invalid_argument("maximal_net: g must be nonnegative");

  BaseDistance d(space, basepoint);
  const int n = space.size();

  // stage 1: greedy maximal separated subset of X_t, deterministic index order
  std::vector<int> ys;
  for (int y = 0; y < n; ++y) {
    if (t * d(y) > 0.5) continue;
    bool ok = true;
    for (int yk : ys) {
      double sep = a * t * std::min(d(y), d(yk)) / 4.0;
      if (space.dist(y, yk) < sep) {
        ok = false;
        break;
      }
    }
    if (ok) ys.push_back(y);
  }

  Net net;
  net.t = t;
  net.a = a;
  net.basepoint = basepoint;

  // stage 2: pick x_j in B(y_j, a t d(y_j)/4) with g(x_j) <= 2 * ball average
  for (int yj : ys) {
    double r = a * t * d(yj) / 4.0;
    double mass = 0.0, avg = 0.0;
    for (int z = 0; z < n; ++z) {
      if (space.dist(yj, z) <= r) {
        mass += space.weight(z);
        avg += g[z] * space.weight(z);
      }
    }
    avg /= mass;
    int pick = -1;
    for (int z = 0; z < n; ++z) {
      if (space.dist(yj, z) <= r && g[z] <= 2.0 * avg + 1e-300) {
        pick = z;
        break;
      }
    }
    if (pick < 0) pick = yj;  // unreachable for nonnegative g
    net.centers.push_back(pick);
  }

  // realized constants
  int overlap = 0;
  for (int x = 0; x < n; ++x) {
    int c = 0;
    for (int xj : net.centers)
      if (space.dist(xj, x) <= t * d(xj)) ++c;
    overlap = std::max(overlap, c);
  }
  net.overlap_bound = overlap;

  double avg_const = 1.0;
  for (int xj : net.centers) {
    double r = t * d(xj);
    double mass = 0.0, avg = 0.0;
    for (int z = 0; z < n; ++z) {
      if (space.dist(xj, z) <= r) {
        mass += space.weight(z);
        avg += g[z] * space.weight(z);
      }
    }
    avg /= mass;
    if (avg > 0.0) avg_const = std::max(avg_const, g[xj] / avg);
  }
  net.average_constant = avg_const;
  return net;
}

inline NetAudit audit_net(const DiscreteSpace& space, const Net& net, const Field& g) {
  NetAudit audit;
  BaseDistance d(space, net.basepoint);
  for (int xj : net.centers)
    if (net.t * d(xj) > 1.0 + 1e-12) audit.times_ok = false;
  for (int x = 0; x < space.size(); ++x) {
    if (net.t * d(x) > 0.5) continue;
    bool covered = false;
    for (int xj : net.centers) {
      if (space.dist(xj, x) <= net.a * net.t * d(xj)) {
        covered = true;
        break;
      }
    }
    if (!covered) {
      audit.cover_ok = false;
      audit.uncovered = x;
      break;
    }
  }
  for (int xj : net.centers) {
    double r = net.t * d(xj);
    double mass = 0.0, avg = 0.0;
    for (int z = 0; z < space.size(); ++z) {
      if (space.dist(xj, z) <= r) {
        mass += space.weight(z);
        avg += g[z] * space.weight(z);
      }
    }
    avg /= mass;
    if (g[xj] > net.average_constant * avg + 1e-12 * (1.0 + g[xj])) audit.average_ok = false;
  }
  return audit;
}

// ---------------------------------------------------------------------------
// Patchwork: maximal kappa/3-separated centres, a subordinate partition of
// unity with profile psi (1 on [0,k/2], 0 past 3k/4), enlarged cutoffs, and a
// finite colouring with 4*kappa separation inside each colour class.
// ---------------------------------------------------------------------------
struct Patchwork {
  std::vector<int> centers;
  std::vector<int> color;  // per centre
  int num_colors = 0;
  std::vector<Field> cutoffs;    // phi_p
  std::vector<Field> enlarged;   // phi~_p
  double kappa = 0.0;
};

namespace detail {
// C^1 step: 1 on [0,lo], 0 on [hi,inf)
inline double smooth_step_down(double x, double lo, double hi) {
  if (x <= lo) return 1.0;
  if (x >= hi) return 0.0;
  double u = (x - lo) / (hi - lo);
  return 1.0 - u * u * (3.0 - 2.0 * u);
}
}  // namespace detail

inline Patchwork build_patchwork(const DiscreteSpace& space, double kappa) {
  if (!(kappa >= 4.0 * space.spacing()))
    throw std::invalid_argument("build_patchwork: kappa below resolution (need >= 4*spacing)");
  const int n = space.size();
  Patchwork pw;
  pw.kappa = kappa;

  // greedy maximal (kappa/3)-separated set
  for (int x = 0; x < n; ++x) {
    bool ok = true;
    for (int p : pw.centers) {
      if (space.dist(x, p) < kappa / 3.0) {
        ok = false;
        break;
      }
    }
    if (ok) pw.centers.push_back(x);
  }

  // partition of unity
  const int m = static_cast<int>(pw.centers.size());
  std::vector<Field> psi(m, Field(space));
  Field total(space);
  for (int p = 0; p < m; ++p) {
    for (int x = 0; x < n; ++x) {
      double val = detail::smooth_step_down(space.dist(pw.centers[p], x), kappa / 2.0, 0.75 * kappa);
      psi[p][x] = val;
      total[x] += val;
    }
  }
  pw.cutoffs.assign(m, Field(space));
  for (int p = 0; p < m; ++p)
    for (int x = 0; x < n; ++x)
      pw.cutoffs[p][x] = psi[p][x] > 0.0 ? psi[p][x] / total[x] : 0.0;

  // enlarged cutoffs: 1 on B_kappa(p), supported in B_{2kappa}(p)
  pw.enlarged.assign(m, Field(space));
  for (int p = 0; p < m; ++p)
    for (int x = 0; x < n; ++x)
      pw.enlarged[p][x] = detail::smooth_step_down(space.dist(pw.centers[p], x), kappa, 1.5 * kappa);

  // colours: recursive maximal 4*kappa-separated extraction
  pw.color.assign(m, -1);
  int color = 0;
  int remaining = m;
  while (remaining > 0) {
    for (int p = 0; p < m; ++p) {
      if (pw.color[p] >= 0) continue;
      bool ok = true;
      for (int q = 0; q < m; ++q) {
        if (pw.color[q] == color && space.dist(pw.centers[p], pw.centers[q]) < 4.0 * kappa) {
          ok = false;
          break;
        }
      }
      if (ok) {
        pw.color[p] = color;
        --remaining;
      }
    }
    ++color;
    if (color > m) throw std::runtime_error("build_patchwork: colouring failed to terminate");
  }
  pw.num_colors = color;
  return pw;
}

// max |f(x)-f(y)| / d(x,y) over pairs with 0 < d(x,y) <= max_pair_dist
inline double measured_lipschitz(const Field& f, double max_pair_dist = kInf) {
  const DiscreteSpace& s = *f.space;
  double lip = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    for (int j = i + 1; j < s.size(); ++j) {
      double d = s.dist(i, j);
      if (d <= 0.0 || d > max_pair_dist) continue;
      lip = std::max(lip, std::abs(f[i] - f[j]) / d);
    }
  }
  return lip;
}

}  // namespace hardylab
