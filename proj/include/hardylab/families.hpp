#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hardylab/common.hpp"
#include "hardylab/kernels.hpp"
#include "hardylab/space.hpp"

namespace hardylab {

// ---------------------------------------------------------------------------
// Deterministic families used by campaigns and verification suites: Hoelder
// cutoffs in F_gamma(o, 1) and seeded smooth sample functions. Both are drawn
// in resolution-independent coordinates.
// ---------------------------------------------------------------------------

// exact feasibility projection into F_gamma(o, r)
inline Field project_to_holder_family(const Field& raw, int o, double r, double gamma) {
  const DiscreteSpace& space = *raw.space;
  double rD = std::pow(r, -static_cast<double>(space.dimension()));
  Field phi = raw;
  for (int y = 0; y < space.size(); ++y)
    if (space.dist(o, y) > r) phi[y] = 0.0;

  double viol = 1.0;
  for (int y = 0; y < space.size(); ++y) viol = std::max(viol, std::abs(phi[y]) / rD);
  int stride = space.size() <= 2048 ? 1 : space.size() / 2048 + 1;
  for (int y = 0; y < space.size(); y += stride) {
    for (int z = y + 1; z < space.size(); z += stride) {
      double d = space.dist(y, z);
      if (d <= 0.0) continue;
      double bound = rD * std::pow(d / r, gamma);
      viol = std::max(viol, std::abs(phi[y] - phi[z]) / bound);
    }
  }
  // stride sampling can miss the worst pair; pad the projection
  viol *= stride == 1 ? 1.0 + 1e-12 : 1.05;
  for (double& v : phi.v) v /= viol;
  return phi;
}

// named cutoff shapes centred at o, projected into F_gamma(o, 1)
inline std::vector<Field> make_cutoff_family(const DiscreteSpace& space, int o, double gamma,
                                             int count) {
  std::vector<Field> fam;
  std::vector<Profile> shapes = {triangle_profile(), plateau_profile(), cosine_profile(),
                                 power_profile(gamma)};
  for (const Profile& p : shapes) {
    if (static_cast<int>(fam.size()) >= count) break;
    Field raw(space);
    for (int y = 0; y < space.size(); ++y) raw[y] = p(space.dist(o, y));
    fam.push_back(project_to_holder_family(raw, o, 1.0, gamma));
  }
  if (static_cast<int>(fam.size()) < count) {
    // signed dipole: opposite bumps inside B(o,1)
    Field raw(space);
    Profile tri = triangle_profile();
    int far = o;
    for (int y = 0; y < space.size(); ++y)
      if (space.dist(o, y) <= 1.0 && space.dist(o, y) > space.dist(o, far)) far = y;
    for (int y = 0; y < space.size(); ++y)
      raw[y] = tri(space.dist(o, y) / 0.45) - tri(space.dist(far, y) / 0.45);
    fam.push_back(project_to_holder_family(raw, o, 1.0, gamma));
  }
  int extra = 0;
  while (static_cast<int>(fam.size()) < count) {
    // off-centre bumps at shrinking radii
    double rr = 0.3 / (1 << extra);
    Field raw(space);
    Profile cos_p = cosine_profile();
    int c = o;
    for (int y = 0; y < space.size(); ++y)
      if (std::abs(space.dist(o, y) - 0.5) < std::abs(space.dist(o, c) - 0.5)) c = y;
    for (int y = 0; y < space.size(); ++y) raw[y] = cos_p(space.dist(c, y) / rr);
    fam.push_back(project_to_holder_family(raw, o, 1.0, gamma));
    ++extra;
  }
  return fam;
}

// seeded trigonometric sample function, sup-normalised to ~1
inline Field random_smooth_field(const DiscreteSpace& space, const Rng& rng, std::uint64_t stream,
                                 int index, int modes = 6) {
  Field f(space);
  std::uint64_t base = static_cast<std::uint64_t>(index) * 128;
  for (int x = 0; x < space.size(); ++x) {
    double v = 0.0;
    for (int a = 0; a < space.dimension(); ++a) {
      double xi = space.coord(x, a) / space.extent();
      for (int k = 1; k <= modes; ++k) {
        std::uint64_t ctr = base + static_cast<std::uint64_t>(a) * 2 * modes + 2 * k;
        double amp = rng.uniform(stream, ctr, -1.0, 1.0) / k;
        double phase = rng.uniform(stream, ctr + 1, 0.0, 6.283185307179586);
        v += amp * std::cos(2.0 * 3.14159265358979323846 * k * xi + phase);
      }
    }
    f[x] = v;
  }
  double sup = f.sup();
  if (sup > 0.0)
    for (double& v : f.v) v /= sup;
  return f;
}

// seeded piecewise-constant field on a fixed coarse partition (resolution
// independent: cell boundaries never move under grid refinement)
inline Field random_piecewise_field(const DiscreteSpace& space, const Rng& rng,
                                    std::uint64_t stream, int index, int cells = 32) {
  Field f(space);
  std::uint64_t base = static_cast<std::uint64_t>(index) * 1024;
  for (int x = 0; x < space.size(); ++x) {
    std::uint64_t cell = 0;
    for (int a = 0; a < space.dimension(); ++a) {
      double xi = space.coord(x, a) / space.extent();
      int c = std::min(cells - 1, static_cast<int>(xi * cells));
      cell = cell * cells + static_cast<std::uint64_t>(c);
    }
    f[x] = rng.uniform(stream, base + cell, -1.0, 1.0);
  }
  return f;
}

}  // namespace hardylab
