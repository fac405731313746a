#include <catch_amalgamated.hpp>

#include <cmath>

#include "hardylab/families.hpp"
#include "hardylab/hardy.hpp"

using namespace hardylab;

namespace {

// 1D dipole: m(B)^-1 (1_{[x0, x0+r)} - 1_{[x0-r, x0)})
std::pair<Field, Ball> make_dipole(const DiscreteSpace& s, double center, double r) {
  int c = s.nearest_to({center});
  Ball B{c, r};
  Field a(s);
  double mB = s.ball_measure(c, r);
  for (int y = 0; y < s.size(); ++y) {
    double delta = s.coord(y, 0) - s.coord(c, 0);
    if (delta >= 0.0 && delta < r) a[y] = 1.0 / mB;
    if (delta < 0.0 && delta >= -r) a[y] = -1.0 / mB;
  }
  return {a, B};
}

}  // namespace

TEST_CASE("dipole is a standard infinity-atom") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  auto [a, B] = make_dipole(s, 0.5, 0.125);
  // direct integral and sup computation
  REQUIRE(a.integral() == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(a.sup() == Catch::Approx(1.0 / s.ball_measure(B.center, B.radius)));
  AtomCheck chk = validate_atom(a, B, 0.25);
  REQUIRE(chk.ok);
  REQUIRE(chk.flavor == "standard");
}

TEST_CASE("normalised indicator flavors") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  double scale = 0.25;
  int c = s.nearest_to({0.5});
  auto indicator = [&](double r) {
    Field a(s);
    double mB = s.ball_measure(c, r);
    for (int y : s.ball(c, r)) a[y] = 1.0 / mB;
    return a;
  };
  // radius = s: global atom (mean 1, allowed)
  AtomCheck global = validate_atom(indicator(scale), Ball{c, scale}, scale);
  REQUIRE(global.ok);
  REQUIRE(global.flavor == "global");
  // radius = s/2: rejected both ways
  AtomCheck rej = validate_atom(indicator(scale / 2), Ball{c, scale / 2}, scale);
  REQUIRE_FALSE(rej.ok);
  REQUIRE(rej.flavor == "reject");
  bool canc = false, rad = false;
  for (const auto& why : rej.reasons) {
    canc = canc || why.find("cancellation") != std::string::npos;
    rad = rad || why.find("radius differs") != std::string::npos;
  }
  REQUIRE(canc);
  REQUIRE(rad);
}

TEST_CASE("ion validation") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  double scale = 0.25;
  auto [a, B] = make_dipole(s, 0.5, 0.125);
  REQUIRE(validate_ion(a, B, scale).ok);  // atoms are ions

  double mB = s.ball_measure(B.center, B.radius);
  Field g(s);
  for (int y : s.ball(B.center, B.radius)) g[y] = B.radius / mB;
  AtomCheck ion = validate_ion(g, B, scale);
  REQUIRE(ion.ok);
  REQUIRE(ion.mean == Catch::Approx(B.radius));

  Field g2(s);
  for (int y : s.ball(B.center, B.radius)) g2[y] = 2.0 * B.radius / mB;
  AtomCheck rej = validate_ion(g2, B, scale);
  REQUIRE_FALSE(rej.ok);
}

TEST_CASE("atoms validate at every larger scale") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  auto [a, B] = make_dipole(s, 0.5, 1.0 / 16);
  for (double scale : {1.0 / 16, 1.0 / 8, 0.5, 1.0})
    REQUIRE(validate_atom(a, B, scale).flavor == "standard");
}

TEST_CASE("identity pushforward at the threshold H") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  double scale = 0.25;
  auto [a, B] = make_dipole(s, 0.5, 0.125);
  PushforwardSpec spec;
  spec.target = &s;
  spec.psi.resize(s.size());
  for (int i = 0; i < s.size(); ++i) spec.psi[i] = i;
  spec.A = 1.0;
  spec.L = 1.0;
  spec.ahlfors_A_src = 1.0;
  spec.ahlfors_A_dst = 1.0;
  spec.H = pushforward_min_H(spec, scale, 1.0);
  PushforwardResult res = atom_to_ion(a, B, scale, spec);
  AtomCheck chk = validate_ion(res.g, res.ball, spec.A * scale);
  REQUIRE(chk.ok);
  REQUIRE(chk.lp_norm <= chk.size_bound);  // size margin >= 0
  REQUIRE(std::abs(chk.mean) <= 1e-12);
  // below the threshold the pushforward is rejected
  spec.H = 0.5 * res.H_min;
  REQUIRE_THROWS_AS(atom_to_ion(a, B, scale, spec), std::invalid_argument);
}

TEST_CASE("dilation pushforward produces an ion at the doubled scale") {
  DiscreteSpace src = DiscreteSpace::grid(1, 1.0, 1.0 / 128);
  DiscreteSpace dst = DiscreteSpace::grid(1, 2.0, 1.0 / 64);
  double scale = 0.25;
  auto [a, B] = make_dipole(src, 0.5, 0.125);
  PushforwardSpec spec;
  spec.target = &dst;
  spec.psi.resize(dst.size());
  for (int i = 0; i < dst.size(); ++i) {
    double pre = dst.coord(i, 0) / 2.0;
    spec.psi[i] = src.nearest_to({pre});
  }
  spec.A = 2.0;
  spec.L = 1.0;
  spec.ahlfors_A_src = 2.0;
  spec.ahlfors_A_dst = 2.0;
  spec.H = pushforward_min_H(spec, scale, 1.0);
  PushforwardResult res = atom_to_ion(a, B, scale, spec);
  REQUIRE(res.ball.radius == Catch::Approx(0.25));
  for (int y = 0; y < dst.size(); ++y)
    if (res.g[y] != 0.0) REQUIRE(dst.dist(res.ball.center, y) <= res.ball.radius + 1e-12);
  AtomCheck chk = validate_ion(res.g, res.ball, spec.A * scale);
  REQUIRE(chk.ok);
}

TEST_CASE("lipschitz multiplier keeps the ion mean bound") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 128);
  double scale = 0.25;
  auto [a, B] = make_dipole(s, 0.5, 0.125);
  Patchwork pw = build_patchwork(s, 0.125);
  // pick the cutoff whose centre is nearest the atom
  std::size_t best = 0;
  for (std::size_t p = 1; p < pw.centers.size(); ++p)
    if (s.dist(pw.centers[p], B.center) < s.dist(pw.centers[best], B.center)) best = p;
  const Field& phi = pw.cutoffs[best];
  double L = std::max(1.0, measured_lipschitz(phi));
  PushforwardSpec spec;
  spec.target = &s;
  spec.psi.resize(s.size());
  for (int i = 0; i < s.size(); ++i) spec.psi[i] = i;
  spec.A = 1.0;
  spec.L = L;
  spec.multiplier = &phi;
  spec.ahlfors_A_src = 1.0;
  spec.ahlfors_A_dst = 1.0;
  spec.H = pushforward_min_H(spec, scale, 1.0);
  PushforwardResult res = atom_to_ion(a, B, scale, spec);
  double mean = res.g.integral();
  REQUIRE(std::abs(mean) <= L * B.radius / spec.H + 1e-12);
  REQUIRE(validate_ion(res.g, res.ball, scale).ok);
}

TEST_CASE("hardy norm surrogate basics") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  Kernel k = make_bump_kernel(s, triangle_profile());
  FittedConstants fit = verify_lai(k, s, 1.0, 1.0);
  Kernel sk = k.scaled(fit.scale);
  REQUIRE(hardy_norm_estimate(Field(s), sk).total == 0.0);

  // atoms have uniformly bounded surrogates
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    AtomSample atom = random_atom(s, rng, 99, i, 0.25, i % 2 == 1, 4.0 * s.spacing());
    AtomCheck chk = validate_atom(atom.a, atom.ball, 0.25);
    REQUIRE(chk.ok);
    REQUIRE(chk.flavor == atom.flavor);
    worst = std::max(worst, hardy_norm_estimate(atom.a, sk).total);
  }
  REQUIRE(std::isfinite(worst));
  REQUIRE(worst > 0.0);

  // mean-carrying indicators blow up logarithmically as the radius shrinks
  int c = s.nearest_to({0.5});
  std::vector<double> surro;
  for (double r : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    Field f(s);
    double mB = s.ball_measure(c, r);
    for (int y : s.ball(c, r)) f[y] = 1.0 / mB;
    surro.push_back(hardy_norm_estimate(f, sk).total);
  }
  std::vector<double> inc;
  for (std::size_t i = 1; i < surro.size(); ++i) {
    REQUIRE(surro[i] > surro[i - 1]);
    inc.push_back(surro[i] - surro[i - 1]);
  }
  for (std::size_t i = 1; i < inc.size(); ++i) {
    REQUIRE(inc[i] / inc[i - 1] > 0.5);
    REQUIRE(inc[i] / inc[i - 1] < 2.0);
  }
  REQUIRE(surro.back() > worst);
}

TEST_CASE("atom suite splits and the complement bound shape") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  Kernel k = make_bump_kernel(s, triangle_profile());
  FittedConstants fit = verify_lai(k, s, 1.0, 1.0);
  Kernel sk = k.scaled(fit.scale);
  double lambda = 0.25;
  SplitKernel split = split_ai(sk, lambda);

  // complement contribution of dipoles is r_B-independent up to the constant;
  // the annulus 5B .. B(c_B, r_B + lambda) is nonempty only for r_B < lambda/4
  double cmin = kInf, cmax = 0.0;
  for (double r : {1.0 / 32, 1.0 / 64, 1.0 / 128}) {
    auto [a, B] = make_dipole(s, 0.25, r);
    MaximalResult mr = radial_maximal(split.local, a);
    double far = 0.0;
    for (int x = 0; x < s.size(); ++x)
      if (s.dist(B.center, x) > 5.0 * r) far += mr.field[x] * s.weight(x);
    double shape = r * (1.0 / (2.0 * r) - 1.0 / (2.0 * lambda));
    double C = far / shape;
    cmin = std::min(cmin, C);
    cmax = std::max(cmax, C);
  }
  REQUIRE(std::isfinite(cmax));
  REQUIRE(cmax <= 4.0 * cmin);

  // the lambda-local part of K* a is supported in B(c_B, r_B + lambda)
  auto [a, B] = make_dipole(s, 0.5, 1.0 / 16);
  MaximalResult mr = radial_maximal(split.local, a);
  for (int x = 0; x < s.size(); ++x)
    if (s.dist(B.center, x) > B.radius + lambda) REQUIRE(mr.field[x] == 0.0);

  // tail contribution is controlled by the uniform-integrability constant
  double full_tail_norm = 0.0;
  std::vector<double> t_grid = default_t_grid(s);
  for (int y = 0; y < s.size(); ++y) {
    double acc = 0.0;
    for (int x = 0; x < s.size(); ++x) {
      double m = 0.0;
      for (double t : t_grid) m = std::max(m, std::abs(split.tail(t, x, y)));
      acc += m * s.weight(x);
    }
    full_tail_norm = std::max(full_tail_norm, acc);
  }
  MaximalResult tail_mr = radial_maximal(split.tail, a);
  REQUIRE(tail_mr.field.l1() <= full_tail_norm * a.l1() + 1e-12);
}

TEST_CASE("atom suite report over random atoms") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 128);
  Kernel k = make_bump_kernel(s, triangle_profile());
  FittedConstants fit = verify_lai(k, s, 1.0, 1.0);
  SplitKernel split = split_ai(k.scaled(fit.scale), 0.25);
  Rng rng(2026);
  AtomSuiteReport rep = atom_maximal_suite(split.local, 0.25, 30, 0.25, rng);
  REQUIRE(rep.degenerate == 0);
  REQUIRE(rep.rows.size() == 30);
  REQUIRE(rep.max_total_standard > 0.0);
  REQUIRE(rep.max_total_global > 0.0);
  REQUIRE(std::isfinite(rep.fitted_shape_C));
  for (const auto& row : rep.rows)
    REQUIRE(row.total == Catch::Approx(row.near + row.far).margin(1e-12));
}
