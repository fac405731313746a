#include <catch_amalgamated.hpp>

#include <cmath>

#include "hardylab/kernels.hpp"

using namespace hardylab;

TEST_CASE("torus heat kernel has unit mass") {
  DiscreteSpace s = DiscreteSpace::torus(1, 1.0, 1.0 / 257);
  TorusHeat heat(s);
  for (double time : {0.01, 0.1, 1.0}) {
    double mass = 0.0;
    for (int y = 0; y < s.size(); ++y) mass += heat(time, 0, y) * s.weight(y);
    REQUIRE(std::abs(mass - 1.0) < 1e-10);
  }
}

TEST_CASE("torus heat kernel semigroup identity") {
  DiscreteSpace s = DiscreteSpace::torus(1, 1.0, 1.0 / 257);
  TorusHeat heat(s);
  for (double a : {0.05, 0.1}) {
    for (double b : {0.05, 0.1}) {
      int x = 3, y = 100;
      double conv = 0.0;
      for (int z = 0; z < s.size(); ++z) conv += heat(a, x, z) * heat(b, z, y) * s.weight(z);
      REQUIRE(std::abs(conv - heat(a + b, x, y)) < 1e-6);
    }
  }
}

namespace {

// fit the smallest grid constant C with h_t <= C e^{-d^2/(C t)} t^{-n/2}
// (upper = true) or the largest with h_t >= C e^{-d^2/(C t)} t^{-n/2}
double fit_gaussian_constant(const DiscreteSpace& s, const TorusHeat& heat, bool upper) {
  std::vector<double> t_grid = geometric_grid(0.01, 1.0, std::pow(2.0, 0.25));
  auto admissible = [&](double C) {
    for (double t : t_grid)
      for (int y = 0; y < s.size(); ++y) {
        double d = s.dist(0, y);
        double bound = C * std::exp(-d * d / (C * t)) * std::pow(t, -0.5 * s.dimension());
        double h = heat(t, 0, y);
        if (upper && h > bound) return false;
        if (!upper && h < bound) return false;
      }
    return true;
  };
  if (upper) {
    for (double C = 1.0; C < 64.0; C *= 1.05)
      if (admissible(C)) return C;
    return kInf;
  }
  double best = 0.0;
  for (double C = 1.0 / 64.0; C < 4.0; C *= 1.05)
    if (admissible(C)) best = C;
  return best;
}

}  // namespace

TEST_CASE("two-sided gaussian fit is refinement stable") {
  DiscreteSpace coarse = DiscreteSpace::torus(1, 1.0, 1.0 / 129);
  DiscreteSpace fine = DiscreteSpace::torus(1, 1.0, 1.0 / 258);
  TorusHeat hc(coarse), hf(fine);
  double up_c = fit_gaussian_constant(coarse, hc, true);
  double up_f = fit_gaussian_constant(fine, hf, true);
  double lo_c = fit_gaussian_constant(coarse, hc, false);
  double lo_f = fit_gaussian_constant(fine, hf, false);
  REQUIRE(std::isfinite(up_c));
  REQUIRE(lo_c > 0.0);
  REQUIRE(up_f <= up_c * 1.2);
  REQUIRE(up_c <= up_f * 1.2);
  REQUIRE(lo_f <= lo_c * 1.2);
  REQUIRE(lo_c <= lo_f * 1.2);
}

TEST_CASE("poisson model on the diagonal") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 64);
  Kernel k = make_poisson_model(s);
  for (double t : {0.1, 0.33, 1.0}) REQUIRE(k(t, 5, 5) == Catch::Approx(1.0 / t));
}

TEST_CASE("bump kernel rejects non-Hoelder profiles") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 64);
  Profile bad = triangle_profile();
  bad.holder_const = 0.1;  // declared constant below the true slope
  REQUIRE_THROWS_AS(make_bump_kernel(s, bad), std::invalid_argument);
  Profile kink = power_profile(0.5);
  kink.gamma = 1.0;  // sqrt-type profile is not Lipschitz
  REQUIRE_THROWS_AS(make_bump_kernel(s, kink), std::invalid_argument);
}

TEST_CASE("subordinated kernel mass approximates one") {
  DiscreteSpace s = DiscreteSpace::torus(1, 1.0, 1.0 / 64);
  auto sub = std::make_shared<Subordinator>(0.5, 1e-5, 1e7, 60);
  Kernel k = make_subordinated(s, 0.5, sub);
  REQUIRE(k.gamma == Catch::Approx(1.0));
  double mass = 0.0;
  for (int y = 0; y < s.size(); ++y) mass += k(0.5, 0, y) * s.weight(y);
  REQUIRE(std::abs(mass - 1.0) < 0.01);
}

TEST_CASE("poisson model upper constant matches the 1D scan") {
  // oracle: sup_u ((1+u)^2/(1+u^2))^{(D+1)/2} = 2^{(D+1)/2} at u = 1
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  Kernel k = make_poisson_model(s);
  SampleBudget budget;
  budget.max_centers = 64;
  budget.max_partners = 257;
  FittedConstants fit = verify_lai(k, s, 1.0, kInf, budget);
  REQUIRE(fit.C1 == Catch::Approx(2.0).epsilon(0.02));
  REQUIRE(fit.certified);
  REQUIRE(fit.c > 0.0);
  REQUIRE(fit.c < 1.0);
}

TEST_CASE("triangle bump kernel certifies with positive c") {
  // oracle: C1 = max_u (1-u)(1+u)^2 = 32/27 at u = 1/3
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  Kernel k = make_bump_kernel(s, triangle_profile());
  FittedConstants fit = verify_lai(k, s, 1.0, 1.0);
  REQUIRE(fit.C1 == Catch::Approx(32.0 / 27.0).epsilon(0.01));
  REQUIRE(fit.certified);
  REQUIRE(fit.c > 0.0);
  REQUIRE(fit.c < 1.0);
  REQUIRE(fit.margins.at("upper") <= 1.0 + 1e-9);
  REQUIRE(fit.margins.at("holder") <= 1.0 + 1e-9);
}

TEST_CASE("zero kernel fails certification at the lower bound") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 64);
  Kernel zero = make_explicit_kernel(
      s, [](double, int, int) { return 0.0; }, 1.0, 1.0);
  FittedConstants fit = verify_lai(zero, s, 1.0, 1.0);
  REQUIRE_FALSE(fit.certified);
  REQUIRE(fit.c == 0.0);
}

TEST_CASE("support violations are reported with a witness") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 64);
  Kernel wide = make_explicit_kernel(
      s, [&s](double t, int x, int y) { return t / (t + s.dist(x, y)); }, 1.0, 0.1);
  FittedConstants fit = verify_lai(wide, s, 1.0, 0.1);
  REQUIRE_FALSE(fit.support_ok);
  REQUIRE_FALSE(fit.certified);
  bool witnessed = false;
  for (const auto& w : fit.witnesses) witnessed = witnessed || w.find("support") == 0;
  REQUIRE(witnessed);
}

TEST_CASE("finite-difference gradient bound implies the Hoelder condition") {
  // measured C3 <= (4/3)^{n+1+gamma} (1/4)^{1-gamma} C4 for the heat kernel
  DiscreteSpace s = DiscreteSpace::torus(1, 1.0, 1.0 / 129);
  Kernel k = make_heat_torus(s);
  FittedConstants fit = verify_lai(k, s, 1.0, kInf);
  double C4 = 0.0;
  std::vector<double> t_grid = geometric_grid(2.0 / 129, 1.0, std::pow(2.0, 0.25));
  for (double t : t_grid)
    for (int x = 0; x < s.size(); x += 4)
      for (int y = 0; y < s.size(); y += 4) {
        int z = (y + 1) % s.size();
        double dyz = s.dist(y, z);
        double d = s.dist(x, y);
        if (4.0 * dyz > t + d) continue;
        double diff = std::abs(k(t, x, y) - k(t, x, z));
        C4 = std::max(C4, diff / dyz * std::pow(t, 2.0) * std::pow(1.0 + d / t, 3.0));
      }
  double gamma = 1.0;
  double factor = std::pow(4.0 / 3.0, 2.0 + gamma) * std::pow(0.25, 1.0 - gamma);
  REQUIRE(fit.C3 <= factor * C4 * 1.05);
}

TEST_CASE("splitting a compactly supported kernel leaves no tail") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 64);
  Profile narrow = scaled_profile(triangle_profile(), 0.1);  // support within lambda/2
  Kernel k = make_bump_kernel(s, narrow);
  SplitKernel split = split_ai(k, 0.25);
  REQUIRE(split.tail_norm == 0.0);
  for (double t : {0.05, 0.2, 1.0}) REQUIRE(split.tail(t, 3, 40) == 0.0);
}

TEST_CASE("poisson split tail obeys the pointwise cap") {
  // oracle: sup_t t/(t^2+d^2) = 1/(2d) <= 4 once d >= 1/8
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 128);
  Kernel k = make_poisson_model(s);
  SplitKernel split = split_ai(k, 0.25);
  std::vector<double> t_grid = geometric_grid(2.0 / 128, 1.0, kGridRatio);
  double worst = 0.0;
  for (int x = 0; x < s.size(); x += 3)
    for (int y = 0; y < s.size(); y += 3) {
      if (s.dist(x, y) < 0.125) continue;
      for (double t : t_grid) worst = std::max(worst, split.tail(t, x, y));
    }
  REQUIRE(worst <= 4.0 + 1e-9);
  REQUIRE(split.tail_norm > 0.0);
  REQUIRE(std::isfinite(split.tail_norm));
}

TEST_CASE("heat split tail norm is finite on the torus") {
  DiscreteSpace s = DiscreteSpace::torus(1, 1.0, 1.0 / 128);
  Kernel k = make_heat_torus(s);
  SplitKernel split = split_ai(k, 0.25);
  REQUIRE(split.tail_norm > 0.0);
  REQUIRE(std::isfinite(split.tail_norm));
  FittedConstants fit = verify_lai(split.local, s, 1.0, 0.25);
  REQUIRE(fit.support_ok);
  REQUIRE(fit.certified);
}

TEST_CASE("identity chart glue agrees with the kernel on the core") {
  DiscreteSpace src = DiscreteSpace::grid_at(1, -0.5, 1.0, 1.0 / 128);
  DiscreteSpace dst = DiscreteSpace::grid_at(1, -0.5, 1.0, 1.0 / 128);
  int p = src.nearest_to({0.0});
  Chart chart = make_lattice_chart(src, dst, p, 0.4, 1.0);
  Profile narrow = scaled_profile(triangle_profile(), 0.4 / 8.0);
  Kernel k = make_bump_kernel(src, narrow);
  Kernel glued = glue_kernel(k, chart);
  Kernel s_ref = make_reference_lai(dst, 0.4, 1.0, 1.0);
  // Xi = 1 on the half-ball product, Xi = 0 outside the ball product
  for (int X = 0; X < dst.size(); X += 5)
    for (int Y = 0; Y < dst.size(); Y += 5) {
      double rx = dst.dist(chart.target_origin, X), ry = dst.dist(chart.target_origin, Y);
      for (double t : {0.05, 0.2}) {
        if (rx <= 0.1 && ry <= 0.1)
          REQUIRE(glued(t, X, Y) ==
                  Catch::Approx(k(t, chart.inv[X], chart.inv[Y])).margin(1e-14));
        if (rx > 0.2 || ry > 0.2)
          REQUIRE(glued(t, X, Y) == Catch::Approx(s_ref(t, X, Y)).margin(1e-14));
      }
    }
}

TEST_CASE("dilation chart glue certifies as an LAI") {
  DiscreteSpace src = DiscreteSpace::grid_at(1, -0.25, 0.5, 1.0 / 256);
  DiscreteSpace dst = DiscreteSpace::grid_at(1, -0.5, 1.0, 1.0 / 128);
  double Q = 2.0, R0 = 0.4;
  int p = src.nearest_to({0.0});
  Chart chart = make_lattice_chart(src, dst, p, R0, Q);
  REQUIRE(chart.bilip_worst <= Q + 1e-9);
  Profile narrow = scaled_profile(triangle_profile(), R0 / (8.0 * Q * Q));
  Kernel k = make_bump_kernel(src, narrow);
  FittedConstants src_fit = verify_lai(k, src, 1.0, R0 / (8.0 * Q * Q));
  REQUIRE(src_fit.certified);
  Kernel glued = glue_kernel(k, chart);
  FittedConstants fit = verify_lai(glued, dst, 1.0, R0 / Q);
  REQUIRE(fit.certified);
  REQUIRE(fit.C1 <= 4.0 * src_fit.C1);
  REQUIRE(src_fit.C1 <= 4.0 * fit.C1);
}

TEST_CASE("glued constants do not depend on the chart centre") {
  DiscreteSpace src = DiscreteSpace::torus(1, 1.0, 1.0 / 128);
  DiscreteSpace dst = DiscreteSpace::grid_at(1, -0.5, 1.0, 1.0 / 128);
  // patch radius under a quarter circumference keeps the chart an isometry
  double R0 = 0.2, Q = 1.0;
  Profile narrow = scaled_profile(triangle_profile(), R0 / 8.0);
  Kernel k = make_bump_kernel(src, narrow);
  std::vector<FittedConstants> fits;
  for (double c : {0.0, 0.25, 0.6}) {
    Chart chart = make_lattice_chart(src, dst, src.nearest_to({c}), R0, Q);
    fits.push_back(verify_lai(glue_kernel(k, chart), dst, 1.0, R0 / Q));
  }
  for (const auto& fit : fits) REQUIRE(fit.certified);
  for (std::size_t i = 1; i < fits.size(); ++i) {
    REQUIRE(fits[i].C1 == Catch::Approx(fits[0].C1).epsilon(0.2));
    REQUIRE(fits[i].c == Catch::Approx(fits[0].c).epsilon(0.2));
    REQUIRE(fits[i].scale == Catch::Approx(fits[0].scale).epsilon(0.2));
  }
}

TEST_CASE("chart rejects a mis-declared bi-Lipschitz constant") {
  DiscreteSpace src = DiscreteSpace::grid_at(1, -0.25, 0.5, 1.0 / 256);
  DiscreteSpace dst = DiscreteSpace::grid_at(1, -0.5, 1.0, 1.0 / 128);
  // the map stretches by 2 but Q claims 1.5
  REQUIRE_THROWS_AS(make_lattice_chart(src, dst, src.nearest_to({0.0}), 0.4, 1.5),
                    std::invalid_argument);
}
