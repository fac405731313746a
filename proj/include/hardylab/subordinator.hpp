#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hardylab/common.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod 15(7) quadrature.
// ---------------------------------------------------------------------------
namespace quad {

inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
void gk15(const F& f, double a, double b, double& integral, double& error) {
  const double h = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double fk[15];
  for (int i = 0; i < 7; ++i) {
    fk[i] = f(mid - h * kXgk[i]);
    fk[14 - i] = f(mid + h * kXgk[i]);
  }
  fk[7] = f(mid);
  double gk = 0.0, g = 0.0;
  for (int i = 0; i < 7; ++i) gk += kWgk[i] * (fk[i] + fk[14 - i]);
  gk += kWgk[7] * fk[7];
  // Gauss nodes sit at the odd Kronrod indices
  g += kWg[0] * (fk[1] + fk[13]);
  g += kWg[1] * (fk[3] + fk[11]);
  g += kWg[2] * (fk[5] + fk[9]);
  g += kWg[3] * fk[7];
  integral = gk * h;
  error = std::abs(gk - g) * h;
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // accumulated estimate; the caller compares it to its budget
  long evals = 0;
};

template <typename F>
void adaptive_gk_rec(const F& f, double a, double b, double tol, int depth, QuadResult& acc,
                     long max_evals) {
  double val, err;
  gk15(f, a, b, val, err);
  acc.evals += 15;
  if (err <= tol || depth >= 40 || acc.evals > max_evals) {
    acc.value += val;
    acc.error += err;
    return;
  }
  double mid = 0.5 * (a + b);
  adaptive_gk_rec(f, a, mid, 0.5 * tol, depth + 1, acc, max_evals);
  adaptive_gk_rec(f, mid, b, 0.5 * tol, depth + 1, acc, max_evals);
}

template <typename F>
QuadResult adaptive_gk(const F& f, double a, double b, double abs_tol, long max_evals = 4000000) {
  QuadResult acc;
  adaptive_gk_rec(f, a, b, 0.1 * abs_tol, 0, acc, max_evals);
  return acc;
}

}  // namespace quad

// ---------------------------------------------------------------------------
// Subordination density F_alpha: the function with
//
//   e^{-z^alpha} = int_0^inf F_alpha(s) e^{-sz} ds/s.
//
// Evaluated from the real-line contour representation
//
//   F_alpha(s) = (1/pi) int_0^inf s e^{s r cos(th) - r^alpha cos(alpha th)}
//                              sin(s r sin(th) - r^alpha sin(alpha th) + th) dr,
//
// valid for any th in (pi/2, pi]. For alpha <= 1/2 the flat contour th = pi is
// already exponentially decaying; for alpha > 1/2 it blows up at small s, so
// we tilt to th strictly between pi/2 and pi/(2 alpha), where both exponents
// decay. The two branches agree wherever both are usable.
// ---------------------------------------------------------------------------
namespace subdetail {

inline double contour_angle(double alpha) {
  const double pi = 3.14159265358979323846;
  if (alpha <= 0.5) return pi;
  return 0.5 * (0.5 * pi + 0.5 * pi / alpha);
}

}  // namespace subdetail

struct SubordinatorQuadSpec {
  double abs_tol = 1e-10;
  long max_evals = 4000000;
};

inline double subordinator_density(double alpha, double s,
                                   SubordinatorQuadSpec spec = SubordinatorQuadSpec{}) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("subordinator_density: alpha must be in (0,1)");
  if (!(s > 0.0)) throw std::invalid_argument("subordinator_density: s must be positive");

  const double pi = 3.14159265358979323846;
  const double th = subdetail::contour_angle(alpha);
  const double cth = th == pi ? -1.0 : std::cos(th);
  const double sth = th == pi ? 0.0 : std::sin(th);
  const double cath = std::cos(alpha * th);
  const double sath = std::sin(alpha * th);

  auto integrand = [&](double r) {
    double ra = std::pow(r, alpha);
    double ex = s * r * cth - ra * cath;
    if (ex < -745.0) return 0.0;
    double phase = s * r * sth - ra * sath + th;
    return (s / pi) * std::exp(ex) * std::sin(phase);
  };
  // envelope used for tail truncation
  auto envelope = [&](double r) {
    double ex = s * r * cth - std::pow(r, alpha) * cath;
    return ex < -745.0 ? 0.0 : (s / pi) * std::exp(ex);
  };

  // dyadic segments, geometric near zero to absorb the r^alpha kink
  double total = 0.0, err_total = 0.0;
  long evals = 0;
  const double seg_tol = spec.abs_tol / 64.0;
  double left = 0.0, right = 1e-8;
  for (int seg = 0; seg < 96; ++seg) {
    auto res = quad::adaptive_gk(integrand, left, right, seg_tol, spec.max_evals - evals);
    total += res.value;
    err_total += res.error;
    evals += res.evals;
    if (evals >= spec.max_evals) break;
    left = right;
    right *= 2.0;
    if (envelope(left) * (1.0 + left) < spec.abs_tol / 100.0 && left > 1.0 / std::max(s, 1e-3))
      break;
    if (left > 1e13) break;
  }
  if (err_total > spec.abs_tol) {
    std::ostringstream os;
    os << "subordinator_density: quadrature did not converge, error estimate " << err_total;
    throw std::runtime_error(os.str());
  }
  if (total < -1e-10)
    throw std::runtime_error("subordinator_density: negative value " + std::to_string(total));
  return total;
}

// closed form for alpha = 1/2, used as an oracle in tests
inline double subordinator_half_closed_form(double s) {
  const double pi = 3.14159265358979323846;
  return std::exp(-1.0 / (4.0 * s)) / (2.0 * std::sqrt(pi * s));
}

// ---------------------------------------------------------------------------
// Subordinator: cached density values on a log grid (for kernel quadratures)
// plus the fitted constants of the stretched-exponential envelope.
// ---------------------------------------------------------------------------
class Subordinator {
public:
  explicit Subordinator(double alpha, double s_lo = 1e-6, double s_hi = 1e9,
                        int per_decade = 100, SubordinatorQuadSpec spec = SubordinatorQuadSpec{})
      : alpha_(alpha), s_lo_(s_lo), s_hi_(s_hi) {
    int decades = static_cast<int>(std::ceil(std::log10(s_hi / s_lo)));
    int n = decades * per_decade + 1;
    double du = std::log(s_hi / s_lo) / (n - 1);
    log_s_.resize(n);
    f_.resize(n);
    for (int i = 0; i < n; ++i) {
      log_s_[i] = std::log(s_lo) + i * du;
      f_[i] = std::max(0.0, subordinator_density(alpha, std::exp(log_s_[i]), spec));
    }
    fit_envelope();
  }

  double alpha() const { return alpha_; }
  double fitted_C() const { return C_alpha_; }
  double fitted_c() const { return c_alpha_; }

  // interpolated density (log-linear where positive)
  double density(double s) const {
    if (!(s > 0.0)) throw std::invalid_argument("Subordinator::density: s must be positive");
    double u = std::log(s);
    if (u <= log_s_.front()) return 0.0;  // below the stretched-exponential cutoff
    if (u >= log_s_.back()) {
      // asymptotic tail ~ s^-alpha
      return f_.back() * std::pow(s / std::exp(log_s_.back()), -alpha_);
    }
    std::size_t hi = static_cast<std::size_t>((u - log_s_.front()) / (log_s_[1] - log_s_[0])) + 1;
    if (hi >= log_s_.size()) hi = log_s_.size() - 1;
    std::size_t lo = hi - 1;
    double w = (u - log_s_[lo]) / (log_s_[hi] - log_s_[lo]);
    if (f_[lo] > 0.0 && f_[hi] > 0.0)
      return std::exp((1.0 - w) * std::log(f_[lo]) + w * std::log(f_[hi]));
    return (1.0 - w) * f_[lo] + w * f_[hi];
  }

  // worst ratio of the cached values against C s^-a exp(-c s^{-a/(1-a)})
  double envelope_margin() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < log_s_.size(); ++i) {
      double s = std::exp(log_s_[i]);
      double bound = C_alpha_ * std::pow(s, -alpha_) *
                     std::exp(-c_alpha_ * std::pow(s, -alpha_ / (1.0 - alpha_)));
      if (bound > 0.0) worst = std::max(worst, f_[i] / bound);
    }
    return worst;
  }

private:
  void fit_envelope() {
    // pin the stretched-exponential rate at 90% of the saddle-point rate and
    // fit the prefactor over the cached samples
    double B = (1.0 - alpha_) * std::pow(alpha_, alpha_ / (1.0 - alpha_));
    c_alpha_ = 0.9 * B;
    double C = 0.0;
    for (std::size_t i = 0; i < log_s_.size(); ++i) {
      double s = std::exp(log_s_[i]);
      double denom =
          std::pow(s, -alpha_) * std::exp(-c_alpha_ * std::pow(s, -alpha_ / (1.0 - alpha_)));
      if (denom > 0.0 && f_[i] > 0.0) C = std::max(C, f_[i] / denom);
    }
    C_alpha_ = C;
  }

  double alpha_;
  double s_lo_, s_hi_;
  std::vector<double> log_s_, f_;
  double C_alpha_ = 0.0, c_alpha_ = 0.0;
};

// ---------------------------------------------------------------------------
// Laplace identity audit: Simpson in log s of F_alpha(s) e^{-sz} / s against
// e^{-z^alpha}, with exact (non-interpolated) density evaluations on a fixed
// grid shared across z.
// ---------------------------------------------------------------------------
class LaplaceAudit {
public:
  explicit LaplaceAudit(double alpha, int nodes = 4801, double s_lo = 1e-6, double s_hi = 300.0,
                        SubordinatorQuadSpec spec = SubordinatorQuadSpec{1e-11, 4000000})
      : alpha_(alpha), s_lo_(s_lo), s_hi_(s_hi) {
    if (nodes % 2 == 0) ++nodes;
    u_.resize(nodes);
    F_.resize(nodes);
    double du = std::log(s_hi / s_lo) / (nodes - 1);
    for (int i = 0; i < nodes; ++i) {
      u_[i] = std::log(s_lo) + i * du;
      F_[i] = subordinator_density(alpha, std::exp(u_[i]), spec);
    }
  }

  // int_0^inf F(s) e^{-sz} ds/s  via substitution s = e^u
  double transform(double z) const {
    const int n = static_cast<int>(u_.size());
    double du = u_[1] - u_[0];
    auto g = [&](int i) { return F_[i] * std::exp(-z * std::exp(u_[i])); };
    double acc = g(0) + g(n - 1);
    for (int i = 1; i < n - 1; i += 2) acc += 4.0 * g(i);
    for (int i = 2; i < n - 1; i += 2) acc += 2.0 * g(i);
    return acc * du / 3.0;
  }

  double residual(double z) const { return std::abs(transform(z) - std::exp(-std::pow(z, alpha_))); }

private:
  double alpha_;
  double s_lo_, s_hi_;
  std::vector<double> u_, F_;
};

}  // namespace hardylab
