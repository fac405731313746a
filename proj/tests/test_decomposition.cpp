#include <catch_amalgamated.hpp>

#include <cmath>

#include "hardylab/decomposition.hpp"
#include "hardylab/families.hpp"

using namespace hardylab;

namespace {

struct Pipeline {
  DiscreteSpace space;
  int o;
  Kernel kernel;
  FittedConstants fit;
  Kernel scaled;
  ConstantLedger ledger;

  explicit Pipeline(double spacing = 1.0 / 256)
      : space(DiscreteSpace::grid(1, 1.0, spacing)),
        o(space.nearest_to_origin()),
        kernel(make_bump_kernel(space, triangle_profile())),
        fit(verify_lai(kernel, space, 1.0, 1.0)),
        scaled(kernel.scaled(fit.scale)),
        ledger(choose_constants(space, o, fit)) {}
};

Field phi_at_level(const Decomposition& dec, std::size_t level) {
  Field phi = dec.phi0;
  for (std::size_t s = 0; s < level; ++s)
    for (int x = 0; x < phi.size(); ++x) phi[x] -= dec.w[s][x];
  return phi;
}

}  // namespace

TEST_CASE("closed forms for the ledger constants") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 64);
  FittedConstants fit;
  fit.D = 1.0;
  fit.gamma = 1.0;
  fit.c = 0.5;
  fit.certified = true;
  ConstantLedger lg = choose_constants(s, 0, fit);
  REQUIRE(lg.c1 == Catch::Approx(0.25).margin(1e-15));
  REQUIRE(lg.c2 == Catch::Approx(0.25).margin(1e-15));
  REQUIRE(lg.kappa == Catch::Approx(std::pow(2.0, 4.5)).margin(1e-12));
  REQUIRE(lg.sigma == Catch::Approx(1.0 / (2.0 * (std::pow(4.0, 2.5) + 2.0 / 3.0))).margin(1e-15));
  REQUIRE(lg.sigma == Catch::Approx(0.015306122448979591).margin(1e-15));
}

TEST_CASE("ledger feasibility across dimensions and exponents") {
  struct Case {
    double D, gamma;
    DiscreteSpace space;
    Kernel kernel;
  };
  DiscreteSpace s1 = DiscreteSpace::grid(1, 1.0, 1.0 / 128);
  DiscreteSpace s2 = DiscreteSpace::grid(2, 1.0, 1.0 / 16);
  std::vector<Case> cases;
  cases.push_back({1.0, 1.0, s1, make_bump_kernel(s1, triangle_profile())});
  cases.push_back({1.0, 0.5, s1, make_bump_kernel(s1, power_profile(0.5))});
  cases.push_back({2.0, 1.0, s2, make_bump_kernel(s2, triangle_profile())});
  for (auto& c : cases) {
    FittedConstants fit = verify_lai(c.kernel, c.space, c.gamma, 1.0);
    REQUIRE(fit.certified);
    ConstantLedger lg = choose_constants(c.space, c.space.nearest_to_origin(), fit);
    INFO("D=" << c.D << " gamma=" << c.gamma);
    REQUIRE(lg.feasible);
    for (const auto& kv : lg.conditions) {
      INFO("condition " << kv.first);
      REQUIRE(kv.second);
    }
    // stored rho and p agree with their defining formulas
    REQUIRE(lg.rho ==
            Catch::Approx(std::log(1.0 - lg.delta) / std::log(std::pow(lg.eta, lg.D)))
                .margin(1e-15));
    REQUIRE(lg.p == Catch::Approx(1.0 / (1.0 + lg.rho)).margin(1e-15));
    REQUIRE(lg.rho > 0.0);
    REQUIRE(lg.rho < 1.0);
    REQUIRE(lg.p > 0.5);
    REQUIRE(lg.p < 1.0);
  }
}

TEST_CASE("sum-constant calibration floors at the safety factor") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 16);
  CalibrationOptions opts;
  opts.draft_eta = 1e-3;  // below resolution: every t sample is skipped
  double C = calibrate_sum_constants(s, 0, 0.25, 1.0, 0.5, 1.0, opts);
  REQUIRE(C == Catch::Approx(opts.safety * 1.0));
}

TEST_CASE("fitted sum constant majorises the sum on every point") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 256);
  int o = 0;
  BaseDistance d(s, o);
  double a = 0.5, b = 1.0, D = 1.0;
  CalibrationOptions opts;
  opts.draft_eta = 0.25;
  double C = calibrate_sum_constants(s, o, 0.25, D, a, b, opts);
  REQUIRE(std::isfinite(C));
  REQUIRE(C >= 1.0);
  // independent recomputation at t = 1/8 on a fresh net
  Field ones(s, 1.0);
  double t = 0.125;
  Net net = maximal_net(s, o, t, 0.25, ones);
  for (double h : {0.0, 1.0, 4.0}) {
    for (int x = 0; x < s.size(); x += 5) {
      double lhs = 0.0;
      for (int xj : net.centers) {
        double dj = d(xj), dxj = s.dist(xj, x);
        if (dxj < h * t * dj) continue;
        lhs += std::pow(dj, -D - a) * std::pow(1.0 + dxj / (t * dj), -D - b);
      }
      double rhs = std::pow(d(x), -D - a) * std::max(std::pow(t, b), std::pow(1.0 + h, -b));
      REQUIRE(lhs <= C * rhs * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("summation shrinks as the exclusion parameter grows") {
  DiscreteSpace s = DiscreteSpace::grid(1, 1.0, 1.0 / 128);
  BaseDistance d(s, 0);
  Field ones(s, 1.0);
  double t = 0.125, a = 0.5, b = 1.0, D = 1.0;
  Net net = maximal_net(s, 0, t, 0.25, ones);
  auto lhs = [&](int x, double h) {
    double acc = 0.0;
    for (int xj : net.centers) {
      double dj = d(xj), dxj = s.dist(xj, x);
      if (dxj < h * t * dj) continue;
      acc += std::pow(dj, -D - a) * std::pow(1.0 + dxj / (t * dj), -D - b);
    }
    return acc;
  };
  for (int x = 0; x < s.size(); x += 9) REQUIRE(lhs(x, 4.0) <= lhs(x, 0.0) + 1e-15);
}

TEST_CASE("decomposing the zero cutoff gives zero everything") {
  Pipeline pl(1.0 / 128);
  Field f = random_smooth_field(pl.space, Rng(3), 1, 0);
  Decomposition dec = uchiyama_decompose(Field(pl.space), pl.scaled, pl.ledger, f, 4, pl.o);
  REQUIRE(dec.ok);
  for (const auto& lv : dec.levels) {
    for (int sgn : lv.signs) REQUIRE(sgn == 0);
    REQUIRE(lv.residual_ratio == 0.0);
  }
  for (const Field& w : dec.w) REQUIRE(w.sup() == 0.0);
  REQUIRE(dec.residual.sup() == 0.0);
}

TEST_CASE("residual bound holds at every level for a bump cutoff") {
  Pipeline pl;
  Rng rng(17);
  Field f = random_smooth_field(pl.space, rng, 23, 0);
  std::vector<Field> cutoffs = make_cutoff_family(pl.space, pl.o, 1.0, 2);
  Decomposition dec = uchiyama_decompose(cutoffs[0], pl.scaled, pl.ledger, f, 10, pl.o);
  REQUIRE(dec.ok);
  REQUIRE(dec.levels.size() == 10);
  for (const auto& lv : dec.levels) {
    REQUIRE(lv.residual_ratio <= 1.0);
    REQUIRE(lv.w_apriori_ratio <= 1.0);
    REQUIRE(lv.times_ok);
    REQUIRE(lv.avg_ok);
  }
  // per-level decay of the weighted residual sup
  BaseDistance d(pl.space, pl.o);
  double prev = kInf;
  for (std::size_t i = 0; i <= dec.levels.size(); ++i) {
    Field phi = phi_at_level(dec, i);
    double weighted = 0.0;
    for (int x = 0; x < pl.space.size(); ++x)
      weighted = std::max(weighted, std::abs(phi[x]) * std::pow(d(x), 1.5));
    REQUIRE(weighted <= std::pow(1.0 - pl.ledger.delta, static_cast<double>(i)) + 1e-12);
    if (i > 0) REQUIRE(weighted <= prev + 1e-15);
    prev = weighted;
  }
}

TEST_CASE("far-field estimate at active levels") {
  Pipeline pl;
  Rng rng(19);
  Field f = random_smooth_field(pl.space, rng, 29, 0);
  std::vector<Field> cutoffs = make_cutoff_family(pl.space, pl.o, 1.0, 1);
  Decomposition dec = uchiyama_decompose(cutoffs[0], pl.scaled, pl.ledger, f, 6, pl.o);
  REQUIRE(dec.ok);
  BaseDistance d(pl.space, pl.o);
  for (std::size_t i = 0; i < dec.levels.size(); ++i) {
    Field phi = phi_at_level(dec, i);
    double decay = std::pow(1.0 - pl.ledger.delta, static_cast<double>(i));
    for (int x = 0; x < pl.space.size(); ++x) {
      if (std::pow(pl.ledger.eta, static_cast<double>(i)) * d(x) < 2.0) continue;
      REQUIRE(std::abs(phi[x]) <= 0.25 * decay * std::pow(d(x), -1.5) + 1e-15);
    }
  }
}

TEST_CASE("holder propagation of the residuals") {
  Pipeline pl;
  Rng rng(23);
  Field f = random_smooth_field(pl.space, rng, 31, 0);
  std::vector<Field> cutoffs = make_cutoff_family(pl.space, pl.o, 1.0, 1);
  Decomposition dec = uchiyama_decompose(cutoffs[0], pl.scaled, pl.ledger, f, 4, pl.o);
  REQUIRE(dec.ok);
  BaseDistance d(pl.space, pl.o);
  for (std::size_t i = 0; i < dec.levels.size(); ++i) {
    Field phi = phi_at_level(dec, i);
    double decay = std::pow(1.0 - pl.ledger.delta, static_cast<double>(i));
    double radius_scale = pl.ledger.sigma * std::pow(pl.ledger.eta, static_cast<double>(i));
    for (int x = 0; x < pl.space.size(); x += 3) {
      for (int y = 0; y < pl.space.size(); ++y) {
        if (pl.space.dist(x, y) > radius_scale * d(x)) continue;
        REQUIRE(std::abs(phi[x] - phi[y]) <= 0.5 * decay * std::pow(d(x), -1.5) + 1e-15);
      }
    }
  }
}

TEST_CASE("sign coherence near regime centres") {
  Pipeline pl;
  Rng rng(29);
  Field f = random_smooth_field(pl.space, rng, 37, 0);
  std::vector<Field> cutoffs = make_cutoff_family(pl.space, pl.o, 1.0, 2);
  Decomposition dec = uchiyama_decompose(cutoffs[1], pl.scaled, pl.ledger, f, 4, pl.o);
  REQUIRE(dec.ok);
  BaseDistance d(pl.space, pl.o);
  for (std::size_t i = 0; i < dec.levels.size(); ++i) {
    Field phi = phi_at_level(dec, i);
    double decay = std::pow(1.0 - pl.ledger.delta, static_cast<double>(i));
    double radius_scale = pl.ledger.sigma * std::pow(pl.ledger.eta, static_cast<double>(i));
    for (int xj : dec.levels[i].centers) {
      double env = decay * std::pow(d(xj), -1.5);
      if (!(std::abs(phi[xj]) > 0.5 * env)) continue;  // outside the regime
      int want = phi[xj] > 0.0 ? 1 : -1;
      for (int y = 0; y < pl.space.size(); ++y) {
        if (pl.space.dist(xj, y) > radius_scale * d(xj)) continue;
        REQUIRE((phi[y] > 0.0 ? 1 : (phi[y] < 0.0 ? -1 : want)) == want);
      }
    }
  }
}

TEST_CASE("reconstruction identity and coefficient audit") {
  Pipeline pl(1.0 / 128);
  Rng rng(31);
  Field f = random_smooth_field(pl.space, rng, 41, 0);
  std::vector<Field> cutoffs = make_cutoff_family(pl.space, pl.o, 1.0, 1);

  Decomposition none = uchiyama_decompose(cutoffs[0], pl.scaled, pl.ledger, f, 0, pl.o);
  auto [zero_sum, zero_rep] = reconstruct(none);
  REQUIRE(zero_sum.sup() == 0.0);
  for (int x = 0; x < pl.space.size(); ++x)
    REQUIRE(none.residual[x] == Catch::Approx(none.phi0[x]).margin(1e-300));

  Decomposition dec = uchiyama_decompose(cutoffs[0], pl.scaled, pl.ledger, f, 8, pl.o);
  auto [sum, rep] = reconstruct(dec);
  REQUIRE(rep.identity_error < 1e-12);
  REQUIRE(rep.bound_ok);
  REQUIRE(rep.residual_sup <= rep.residual_bound * (1.0 + 1e-12));

  BaseDistance d(pl.space, pl.o);
  for (std::size_t i = 0; i < dec.levels.size(); ++i) {
    const auto& lv = dec.levels[i];
    double base = pl.ledger.kappa * pl.ledger.delta *
                  std::pow(1.0 - pl.ledger.delta, static_cast<double>(i)) *
                  std::pow(std::pow(pl.ledger.eta, pl.ledger.D), 1.0 + i);
    for (std::size_t j = 0; j < lv.centers.size(); ++j) {
      double expect = base * std::pow(d(lv.centers[j]), -pl.ledger.gamma / 2.0);
      REQUIRE(lv.coeffs[j] == Catch::Approx(expect).epsilon(1e-14));
      REQUIRE(lv.times[j] ==
              Catch::Approx(std::pow(pl.ledger.eta, 1.0 + i) * d(lv.centers[j])).epsilon(1e-14));
    }
  }
}

TEST_CASE("runtime residual guard catches a corrupted ledger") {
  Pipeline pl(1.0 / 128);
  Rng rng(37);
  Field f = random_smooth_field(pl.space, rng, 43, 0);
  std::vector<Field> cutoffs = make_cutoff_family(pl.space, pl.o, 1.0, 1);
  ConstantLedger bad = pl.ledger;
  bad.kappa *= 1e5;  // keeps feasible flag stale on purpose
  Decomposition dec = uchiyama_decompose(cutoffs[0], pl.scaled, bad, f, 6, pl.o);
  REQUIRE_FALSE(dec.ok);
  REQUIRE(dec.failure.find("residual bound failed") == 0);

  ConstantLedger infeasible = pl.ledger;
  infeasible.feasible = false;
  REQUIRE_THROWS_AS(uchiyama_decompose(cutoffs[0], pl.scaled, infeasible, f, 2, pl.o),
                    std::invalid_argument);
}

TEST_CASE("cutoffs outside the family are rejected") {
  Pipeline pl(1.0 / 128);
  Field f = random_smooth_field(pl.space, Rng(5), 47, 0);
  Field bad(pl.space, 10.0);  // violates the size bound everywhere
  REQUIRE_THROWS_AS(uchiyama_decompose(bad, pl.scaled, pl.ledger, f, 2, pl.o),
                    std::invalid_argument);
}

TEST_CASE("majorisation audit produces a finite stable constant") {
  Pipeline pl(1.0 / 128);
  Rng rng(41);
  std::vector<Field> cutoffs = make_cutoff_family(pl.space, pl.o, 1.0, 3);
  std::vector<Field> samples;
  for (int i = 0; i < 8; ++i) samples.push_back(random_smooth_field(pl.space, rng, 53, i));
  samples.push_back(Field(pl.space));  // zero sample contributes no row
  MajorizationReport rep =
      majorization_check(cutoffs, samples, pl.scaled, pl.ledger, pl.o);
  REQUIRE(rep.degenerate == 0);
  REQUIRE(rep.E > 0.0);
  REQUIRE(std::isfinite(rep.E));
  int zero_rows = 0;
  for (const auto& row : rep.rows)
    if (row.f_index == 8) ++zero_rows;
  REQUIRE(zero_rows == 0);
}
