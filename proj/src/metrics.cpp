#include "mcflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "mcflow/elements.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/torus.hpp"

namespace mcflow {

namespace {

using Eigen::Matrix3d;

struct ReducedCell {
  LatticeMatrix rows;
  std::vector<Vec3> frac;
  std::vector<int> types;
};

Vec3 wrap(const Vec3& f) { return {wrap01(f[0]), wrap01(f[1]), wrap01(f[2])}; }

// Coordinates follow the basis change: rows' = C rows gives f' = C^-T f.
std::vector<Vec3> change_frac_basis(const std::vector<Vec3>& frac, const IntMatrix3& c) {
  Matrix3d cinv_t = c.cast<double>().inverse().transpose();
  cinv_t = cinv_t.array().round().matrix();
  std::vector<Vec3> out;
  out.reserve(frac.size());
  for (const Vec3& f : frac)
    out.push_back(wrap(cinv_t * f));
  return out;
}

ReducedCell reduce_cell(const Crystal& c) {
  NiggliResult r = niggli_reduce(params_to_matrix(c.lattice));
  return {r.reduced, change_frac_basis(c.frac_coords, r.change_of_basis), c.atom_types};
}

Vec3 frac_delta(const Vec3& from, const Vec3& to) {
  return {torus_log(from[0], to[0]), torus_log(from[1], to[1]), torus_log(from[2], to[2])};
}

double metric_norm2(const Matrix3d& g, const Vec3& d) { return d.dot(g * d); }

double angle_deg(const Vec3& u, const Vec3& v) {
  double c = u.dot(v) / (u.norm() * v.norm());
  return rad2deg(std::acos(std::clamp(c, -1.0, 1.0)));
}

bool length_close(double l1, double l2, double ltol) {
  return std::abs(std::log(l1 / l2)) <= std::log1p(ltol);
}

// Integer bases M (rows) of the lattice spanned by `rows` whose vectors
// M * rows match the lengths and angles of `target` within tolerance.
std::vector<IntMatrix3> candidate_bases(const LatticeMatrix& target, const LatticeMatrix& rows,
                                        const MatchTolerances& tol) {
  std::vector<Eigen::Vector3i> coeffs;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      for (int k = -2; k <= 2; ++k)
        if (i || j || k)
          coeffs.emplace_back(i, j, k);
  std::array<std::vector<int>, 3> by_axis;
  for (size_t n = 0; n < coeffs.size(); ++n) {
    Vec3 v = rows.transpose() * coeffs[n].cast<double>();
    for (int ax = 0; ax < 3; ++ax)
      if (length_close(target.row(ax).norm(), v.norm(), tol.ltol))
        by_axis[ax].push_back(static_cast<int>(n));
  }
  auto vec = [&](int n) -> Vec3 { return rows.transpose() * coeffs[n].cast<double>(); };
  const double alpha = angle_deg(target.row(1), target.row(2));
  const double beta = angle_deg(target.row(0), target.row(2));
  const double gamma = angle_deg(target.row(0), target.row(1));
  std::vector<IntMatrix3> out;
  for (int i : by_axis[0])
    for (int j : by_axis[1]) {
      if (std::abs(angle_deg(vec(i), vec(j)) - gamma) > tol.angle_tol)
        continue;
      for (int k : by_axis[2]) {
        if (std::abs(angle_deg(vec(j), vec(k)) - alpha) > tol.angle_tol ||
            std::abs(angle_deg(vec(i), vec(k)) - beta) > tol.angle_tol)
          continue;
        IntMatrix3 m;
        m.row(0) = coeffs[i].transpose();
        m.row(1) = coeffs[j].transpose();
        m.row(2) = coeffs[k].transpose();
        if (m.cast<double>().determinant() > 0.5 && m.cast<double>().determinant() < 1.5)
          out.push_back(m);
      }
    }
  return out;
}

struct Assessment {
  double max_disp = std::numeric_limits<double>::infinity();
  double rms = 0;
};

Assessment assess(const ReducedCell& a, const std::vector<Vec3>& b_frac, const std::vector<int>& b_types,
                  const Matrix3d& metric, double norm, const Vec3& shift) {
  const int n = static_cast<int>(a.frac.size());
  std::vector<Vec3> disp(n);
  std::map<int, std::vector<int>> a_sites, b_sites;
  for (int i = 0; i < n; ++i) {
    a_sites[a.types[i]].push_back(i);
    b_sites[b_types[i]].push_back(i);
  }
  for (const auto& [el, ai] : a_sites) {
    const std::vector<int>& bi = b_sites.at(el);
    const int m = static_cast<int>(ai.size());
    Eigen::MatrixXd cost(m, m);
    for (int p = 0; p < m; ++p)
      for (int q = 0; q < m; ++q)
        cost(p, q) = metric_norm2(metric, frac_delta(a.frac[ai[p]], b_frac[bi[q]] + shift));
    std::vector<int> assign = hungarian(cost);
    for (int p = 0; p < m; ++p)
      disp[ai[p]] = frac_delta(a.frac[ai[p]], b_frac[bi[assign[p]]] + shift);
  }
  Vec3 mean = Vec3::Zero();
  for (const Vec3& d : disp)
    mean += d;
  mean /= n;
  Assessment out;
  out.max_disp = 0;
  double sum2 = 0;
  for (const Vec3& d : disp) {
    double r2 = metric_norm2(metric, d - mean) / (norm * norm);
    out.max_disp = std::max(out.max_disp, std::sqrt(r2));
    sum2 += r2;
  }
  out.rms = std::sqrt(sum2 / n);
  return out;
}

} // namespace

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n)
    throw InvalidData("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j])
          continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(n);
  for (int j = 1; j <= n; ++j)
    result[p[j] - 1] = j - 1;
  return result;
}

std::optional<double> structure_match(const Crystal& c1, const Crystal& c2,
                                      const MatchTolerances& tol) {
  validate_crystal(c1);
  validate_crystal(c2);
  if (c1.num_atoms() != c2.num_atoms() || composition(c1) != composition(c2))
    return std::nullopt;
  const int n = c1.num_atoms();
  ReducedCell r1 = reduce_cell(c1);
  ReducedCell r2 = reduce_cell(c2);
  const double v1 = cell_volume(r1.rows), v2 = cell_volume(r2.rows);
  const double norm = std::cbrt((v1 + v2) / 2 / n);
  const Matrix3d g1 = r1.rows * r1.rows.transpose();

  std::map<int, int> comp = composition(c1);
  int anchor_el = comp.begin()->first;
  for (auto [el, count] : comp)
    if (count < comp[anchor_el])
      anchor_el = el;
  int anchor = static_cast<int>(std::find(r1.types.begin(), r1.types.end(), anchor_el) - r1.types.begin());

  std::optional<Assessment> best;
  for (const IntMatrix3& m : candidate_bases(r1.rows, r2.rows, tol)) {
    LatticeMatrix basis = m.cast<double>() * r2.rows;
    Matrix3d metric = 0.5 * (g1 + basis * basis.transpose());
    std::vector<Vec3> f2 = change_frac_basis(r2.frac, m);
    for (int j = 0; j < n; ++j) {
      if (r2.types[j] != anchor_el)
        continue;
      Vec3 shift = frac_delta(f2[j], r1.frac[anchor]);
      Assessment a = assess(r1, f2, r2.types, metric, norm, shift);
      if (!best || a.max_disp < best->max_disp ||
          (a.max_disp == best->max_disp && a.rms < best->rms))
        best = a;
    }
  }
  if (!best || best->max_disp > tol.stol)
    return std::nullopt;
  return best->rms;
}

MatchSummary match_rate_rmse(const std::vector<std::vector<Crystal>>& predictions,
                             const std::vector<Crystal>& targets, const MatchTolerances& tol) {
  if (predictions.size() != targets.size())
    throw InvalidData("match_rate_rmse: predictions and targets are not aligned");
  MatchSummary s;
  double rmse_sum = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    std::optional<double> best;
    for (const Crystal& cand : predictions[i]) {
      std::optional<double> r = structure_match(cand, targets[i], tol);
      if (r && (!best || *r < *best))
        best = r;
    }
    s.per_target.push_back(best);
    if (best) {
      ++s.matched;
      rmse_sum += *best;
    }
  }
  s.match_rate = targets.empty() ? 0.0 : 100.0 * s.matched / targets.size();
  s.mean_rmse = s.matched ? rmse_sum / s.matched : std::numeric_limits<double>::quiet_NaN();
  return s;
}

bool structural_validity(const Crystal& c) {
  if (!(cell_volume(c.lattice) >= kMinCellVolume))
    return false;
  Crystal reduced;
  ReducedCell r = reduce_cell(c);
  reduced.atom_types = r.types;
  reduced.frac_coords = r.frac;
  reduced.lattice = matrix_to_params(r.rows);
  if (c.num_atoms() == 1)
    return min_self_image_distance(reduced.lattice) > kMinInteratomicDistance;
  return min_periodic_distance(reduced) > kMinInteratomicDistance;
}

bool compositional_validity(const std::map<int, int>& comp) {
  if (comp.empty())
    throw InvalidData("compositional_validity: empty composition");
  std::vector<int> els, counts;
  bool all_metal = true;
  double combos = 1;
  for (auto [z, n] : comp) {
    if (n <= 0)
      throw InvalidData("compositional_validity: counts must be positive");
    const ElementChemistry& e = element(z);
    all_metal = all_metal && e.metal;
    combos *= static_cast<double>(e.oxidation_states.size());
    els.push_back(z);
    counts.push_back(n);
  }
  if (els.size() == 1 || all_metal)
    return true;
  if (combos == 0)
    return false;
  if (combos > kMaxOxidationCombinations) {
    std::cerr << "warning: oxidation-state search over " << combos
              << " assignments exceeds the cap; composition rejected\n";
    return false;
  }
  const size_t k = els.size();
  std::vector<size_t> idx(k, 0);
  while (true) {
    long charge = 0;
    for (size_t i = 0; i < k; ++i)
      charge += static_cast<long>(counts[i]) * element(els[i]).oxidation_states[idx[i]];
    if (charge == 0) {
      double max_cation = -std::numeric_limits<double>::infinity();
      double min_anion = std::numeric_limits<double>::infinity();
      bool ok = true;
      for (size_t i = 0; i < k; ++i) {
        int ox = element(els[i]).oxidation_states[idx[i]];
        double en = element(els[i]).electronegativity;
        if (ox != 0 && std::isnan(en))
          ok = false;
        else if (ox > 0)
          max_cation = std::max(max_cation, en);
        else if (ox < 0)
          min_anion = std::min(min_anion, en);
      }
      if (ok && min_anion >= max_cation)
        return true;
    }
    size_t i = 0;
    while (i < k && ++idx[i] == element(els[i]).oxidation_states.size())
      idx[i++] = 0;
    if (i == k)
      return false;
  }
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw InvalidData("wasserstein_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double x = std::min(a[0], b[0]);
  double total = 0;
  while (i < a.size() || j < b.size()) {
    double next = std::numeric_limits<double>::infinity();
    if (i < a.size())
      next = std::min(next, a[i]);
    if (j < b.size())
      next = std::min(next, b[j]);
    total += std::abs(i / na - j / nb) * (next - x);
    x = next;
    while (i < a.size() && a[i] == x)
      ++i;
    while (j < b.size() && b[j] == x)
      ++j;
  }
  return total;
}

PropertyDistances property_distances(const std::vector<Crystal>& generated,
                                     const std::vector<Crystal>& reference) {
  auto densities = [](const std::vector<Crystal>& cs) {
    std::vector<double> out;
    for (const Crystal& c : cs)
      out.push_back(c.num_atoms() / cell_volume(c.lattice));
    return out;
  };
  auto elements = [](const std::vector<Crystal>& cs) {
    std::vector<double> out;
    for (const Crystal& c : cs)
      out.push_back(static_cast<double>(composition(c).size()));
    return out;
  };
  return {wasserstein_1d(densities(generated), densities(reference)),
          wasserstein_1d(elements(generated), elements(reference))};
}

} // namespace mcflow
