#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace oracle {

G6 g6(const Eigen::Matrix3d& r) {
  Eigen::Vector3d a = r.row(0), b = r.row(1), c = r.row(2);
  return {a.dot(a), b.dot(b), c.dot(c), 2 * b.dot(c), 2 * a.dot(c), 2 * a.dot(b)};
}

bool is_niggli(const G6& g, double eps) {
  const double A = g[0], B = g[1], C = g[2], xi = g[3], eta = g[4], zeta = g[5];
  auto eq = [eps](double x, double y) { return std::abs(x - y) <= eps; };
  auto le = [eps](double x, double y) { return x <= y + eps; };
  if (!le(A, B) || !le(B, C))
    return false;
  if (!le(std::abs(xi), B) || !le(std::abs(eta), A) || !le(std::abs(zeta), A))
    return false;
  const bool type1 = xi > eps && eta > eps && zeta > eps;
  const bool type2 = xi <= eps && eta <= eps && zeta <= eps;
  if (!type1 && !type2)
    return false;
  if (eq(A, B) && !le(std::abs(xi), std::abs(eta)))
    return false;
  if (eq(B, C) && !le(std::abs(eta), std::abs(zeta)))
    return false;
  if (type1) {
    if (eq(xi, B) && !le(zeta, 2 * eta))
      return false;
    if (eq(eta, A) && !le(zeta, 2 * xi))
      return false;
    if (eq(zeta, A) && !le(eta, 2 * xi))
      return false;
  } else {
    if (eq(xi, -B) && !eq(zeta, 0))
      return false;
    if (eq(eta, -A) && !eq(zeta, 0))
      return false;
    if (eq(zeta, -A) && !eq(eta, 0))
      return false;
    if (eq(xi + eta + zeta + A + B, 0) && !le(2 * A + 2 * eta + zeta, 0))
      return false;
  }
  return true;
}

const std::vector<Eigen::Matrix3i>& unimodular_2() {
  static const std::vector<Eigen::Matrix3i> all = [] {
    std::vector<Eigen::Matrix3i> out;
    std::array<int, 9> e{};
    for (int code = 0; code < 1953125; ++code) {
      int c = code;
      for (int k = 0; k < 9; ++k) {
        e[k] = c % 5 - 2;
        c /= 5;
      }
      int det = e[0] * (e[4] * e[8] - e[5] * e[7]) - e[1] * (e[3] * e[8] - e[5] * e[6]) +
                e[2] * (e[3] * e[7] - e[4] * e[6]);
      if (det != 1)
        continue;
      Eigen::Matrix3i m;
      m << e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8];
      out.push_back(m);
    }
    return out;
  }();
  return all;
}

std::array<double, 6> params_of(const Eigen::Matrix3d& r) {
  Eigen::Vector3d a = r.row(0), b = r.row(1), c = r.row(2);
  auto ang = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
    return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0)) * 180.0 / M_PI;
  };
  return {a.norm(), b.norm(), c.norm(), ang(b, c), ang(a, c), ang(a, b)};
}

std::array<double, 6> brute_force_niggli(const Eigen::Matrix3d& input, bool& found) {
  const double vol = std::abs(input.determinant());
  const double eps = 1e-5 * std::cbrt(vol) * std::cbrt(vol);
  auto trace = [](const G6& g) { return g[0] + g[1] + g[2]; };
  // Descend to a basis no small transform can shorten, then search around it.
  Eigen::Matrix3d rows = input;
  while (true) {
    double current = trace(g6(rows));
    Eigen::Matrix3d best = rows;
    double best_sum = current;
    for (const Eigen::Matrix3i& m : unimodular_2()) {
      Eigen::Matrix3d cand = m.cast<double>() * rows;
      double sum = trace(g6(cand));
      if (sum < best_sum) {
        best_sum = sum;
        best = cand;
      }
    }
    if (best_sum >= current - eps)
      break;
    rows = best;
  }
  const double min_sum = trace(g6(rows));
  found = false;
  for (const Eigen::Matrix3i& m : unimodular_2()) {
    Eigen::Matrix3d cand = m.cast<double>() * rows;
    G6 g = g6(cand);
    if (trace(g) > min_sum + 3 * eps)
      continue;
    if (is_niggli(g, eps)) {
      found = true;
      return params_of(cand);
    }
  }
  return {};
}

double transport_bruteforce(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size(), m = b.size();
  const size_t l = std::lcm(n, m);
  if (l > 8)
    throw std::invalid_argument("transport_bruteforce: lcm above 8");
  std::vector<double> ra, rb;
  for (size_t i = 0; i < l; ++i) {
    ra.push_back(a[i / (l / n)]);
    rb.push_back(b[i / (l / m)]);
  }
  std::vector<int> perm(l);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0;
    for (size_t i = 0; i < l; ++i)
      cost += std::abs(ra[i] - rb[perm[i]]);
    best = std::min(best, cost / l);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

} // namespace oracle
