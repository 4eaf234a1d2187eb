#include "mcflow/flow.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mcflow/errors.hpp"
#include "mcflow/torus.hpp"

namespace mcflow {

double time_denominator(double time) { return std::max(1.0 - time, kDenominatorFloor); }

AtomTypeState to_categories(const std::vector<int>& atomic_numbers) {
  AtomTypeState out;
  out.reserve(atomic_numbers.size());
  for (int z : atomic_numbers) {
    if (!is_supported_element(z))
      throw UnsupportedElement("unsupported element Z=" + std::to_string(z));
    out.push_back(category_of(z));
  }
  return out;
}

std::vector<int> to_atomic_numbers(const AtomTypeState& categories) {
  std::vector<int> out;
  out.reserve(categories.size());
  for (int c : categories) {
    if (c < 0 || c >= kNumElements)
      throw InvalidData("atom state " + std::to_string(c) + " is not a real element");
    out.push_back(element_of(c));
  }
  return out;
}

JointTime sample_time(std::mt19937_64& rng, double clip) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double t = unif(rng);
  double s = unif(rng);
  return {std::min(t, clip), std::min(s, clip)};
}

LogNormalPrior fit_lognormal(const std::vector<Vec3>& lengths) {
  if (lengths.size() < 2)
    throw InvalidData("fit_lognormal needs at least 2 samples");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& l : lengths) {
    if (!(l.minCoeff() > 0))
      throw InvalidData("fit_lognormal: nonpositive length");
    sum += l.array().log().matrix();
  }
  LogNormalPrior p;
  double n = static_cast<double>(lengths.size());
  p.mu = sum / n;
  Vec3 var = Vec3::Zero();
  for (const Vec3& l : lengths)
    var += (l.array().log().matrix() - p.mu).cwiseAbs2();
  p.sigma = (var / n).cwiseSqrt().cwiseMax(kSigmaFloor);
  return p;
}

std::vector<Vec3> sample_frac_base(int num_atoms, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec3> out(num_atoms);
  for (Vec3& f : out)
    for (int k = 0; k < 3; ++k)
      f[k] = unif(rng);
  return out;
}

BaseSample sample_base(int num_atoms, const LogNormalPrior& prior, std::mt19937_64& rng) {
  if (num_atoms < 1)
    throw InvalidData("sample_base: need at least one atom");
  BaseSample b;
  b.atoms.assign(num_atoms, kMaskToken);
  b.frac_coords = sample_frac_base(num_atoms, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < 3; ++k)
    b.lengths[k] = std::exp(prior.mu[k] + prior.sigma[k] * normal(rng));
  std::uniform_real_distribution<double> angle(kMinAngle, kMaxAngle);
  for (int k = 0; k < 3; ++k)
    b.angles[k] = angle(rng);
  return b;
}

AtomTypeState interpolate_discrete(const AtomTypeState& clean, double t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  AtomTypeState out(clean.size());
  for (size_t i = 0; i < clean.size(); ++i)
    out[i] = unif(rng) < t ? clean[i] : kMaskToken;
  return out;
}

std::vector<Vec3> interpolate_frac(const std::vector<Vec3>& f0, const std::vector<Vec3>& f1,
                                   double s) {
  std::vector<Vec3> out(f0.size());
  for (size_t i = 0; i < f0.size(); ++i)
    for (int k = 0; k < 3; ++k)
      out[i][k] = torus_exp(f0[i][k], s * torus_log(f0[i][k], f1[i][k]));
  return out;
}

Vec3 interpolate_linear(const Vec3& y0, const Vec3& y1, double s) {
  return (1 - s) * y0 + s * y1;
}

RateVector cond_rate_atoms(const AtomTypeState& current, const AtomTypeState& clean, double t) {
  RateVector r = RateVector::Zero(static_cast<int>(current.size()), kNumElements);
  double inv = 1.0 / time_denominator(t);
  for (size_t i = 0; i < current.size(); ++i)
    if (current[i] == kMaskToken)
      r(i, clean[i]) = inv;
  return r;
}

std::vector<Vec3> cond_vel_frac(const std::vector<Vec3>& current, const std::vector<Vec3>& clean,
                                double s) {
  double inv = 1.0 / time_denominator(s);
  std::vector<Vec3> out(current.size());
  for (size_t i = 0; i < current.size(); ++i)
    for (int k = 0; k < 3; ++k)
      out[i][k] = torus_log(current[i][k], clean[i][k]) * inv;
  return out;
}

Vec3 cond_vel_linear(const Vec3& current, const Vec3& clean, double s) {
  return (clean - current) / time_denominator(s);
}

namespace {

Eigen::RowVectorXd softmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

} // namespace

RateVector param_rate(const AtomTypeState& current, const Eigen::MatrixXd& logits, double t) {
  RateVector r = RateVector::Zero(static_cast<int>(current.size()), kNumElements);
  double inv = 1.0 / time_denominator(t);
  for (size_t i = 0; i < current.size(); ++i)
    if (current[i] == kMaskToken)
      r.row(i) = softmax_row(logits.row(i).head(kNumElements)) * inv;
  return r;
}

std::vector<Vec3> param_vel_frac(const std::vector<Vec3>& current, const Eigen::MatrixXd& pred,
                                 double s) {
  double inv = 1.0 / time_denominator(s);
  std::vector<Vec3> out(current.size());
  for (size_t i = 0; i < current.size(); ++i)
    for (int k = 0; k < 3; ++k)
      out[i][k] = torus_log(current[i][k], wrap01(pred(i, k))) * inv;
  return out;
}

Vec3 param_vel_linear(const Vec3& current, const Vec3& pred, double s) {
  return (pred - current) / time_denominator(s);
}

double generalized_kl(const Eigen::Ref<const Eigen::RowVectorXd>& u,
                      const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  double total = 0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    if (u[j] > 0)
      total += u[j] * std::log(u[j] / std::max(v[j], kGklFloor));
    total += v[j] - u[j];
  }
  return total;
}

HeadOutputs HeadOutputs::zeros(int num_atoms) {
  HeadOutputs h;
  h.logits = Eigen::MatrixXd::Zero(num_atoms, kNumElements);
  h.frac = Eigen::MatrixXd::Zero(num_atoms, 3);
  return h;
}

ConditionalTargets conditional_targets(const FlowSample& x) {
  return {cond_rate_atoms(x.atoms_t, x.atoms_1, x.time.t), cond_vel_frac(x.frac_s, x.frac_1, x.time.s),
          cond_vel_linear(x.lengths_s, x.lengths_1, x.time.s),
          cond_vel_linear(x.angles_s, x.angles_1, x.time.s)};
}

LossTerms& LossTerms::operator+=(const LossTerms& o) {
  total += o.total;
  atoms += o.atoms;
  frac += o.frac;
  lengths += o.lengths;
  angles += o.angles;
  return *this;
}

LossTerms& LossTerms::operator*=(double k) {
  total *= k;
  atoms *= k;
  frac *= k;
  lengths *= k;
  angles *= k;
  return *this;
}

LossResult flow_matching_loss(const HeadOutputs& pred, const FlowSample& x,
                              const ConditionalTargets& targets, const LossWeights& w) {
  const int n = x.num_atoms();
  if (pred.logits.rows() != n || pred.frac.rows() != n || targets.atoms.rows() != n ||
      static_cast<int>(targets.frac.size()) != n)
    throw InvalidData("flow_matching_loss: shape mismatch");
  LossResult out;
  out.grad = HeadOutputs::zeros(n);
  const double inv_n = 1.0 / n;

  // atom types: GKL(target rate, predicted rate) on masked sites
  const double den_t = time_denominator(x.time.t);
  double atom_sum = 0;
  for (int i = 0; i < n; ++i) {
    if (x.atoms_t[i] != kMaskToken)
      continue;  // both rates vanish
    Eigen::RowVectorXd p = softmax_row(pred.logits.row(i).head(kNumElements));
    Eigen::RowVectorXd v = p / den_t;
    Eigen::RowVectorXd u = targets.atoms.row(i);
    atom_sum += generalized_kl(u, v);
    Eigen::RowVectorXd dv(kNumElements);
    for (int j = 0; j < kNumElements; ++j)
      dv[j] = 1.0 - (v[j] > kGklFloor ? u[j] / v[j] : 0.0);
    Eigen::RowVectorXd dp = dv / den_t;
    double mean = p.dot(dp);
    out.grad.logits.row(i).head(kNumElements) =
        (w.atoms * inv_n) * (p.array() * (dp.array() - mean)).matrix();
  }
  out.terms.atoms = atom_sum * inv_n;

  // fractional coordinates: squared tangent-space distance
  const double den_s = time_denominator(x.time.s);
  double frac_sum = 0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) {
      double v = torus_log(x.frac_s[i][k], wrap01(pred.frac(i, k))) / den_s;
      double diff = v - targets.frac[i][k];
      frac_sum += diff * diff;
      out.grad.frac(i, k) = w.frac * inv_n * 2 * diff / den_s;
    }
  out.terms.frac = frac_sum * inv_n;

  Vec3 dl = param_vel_linear(x.lengths_s, pred.lengths, x.time.s) - targets.lengths;
  out.terms.lengths = dl.squaredNorm();
  out.grad.lengths = w.lengths * 2 * dl / den_s;

  // angle velocities are compared in radians
  constexpr double rad = std::numbers::pi / 180.0;
  Vec3 da = rad * (param_vel_linear(x.angles_s, pred.angles, x.time.s) - targets.angles);
  out.terms.angles = da.squaredNorm();
  out.grad.angles = w.angles * 2 * rad * da / den_s;

  out.terms.total = w.atoms * out.terms.atoms + w.frac * out.terms.frac +
                    w.lengths * out.terms.lengths + w.angles * out.terms.angles;
  return out;
}

} // namespace mcflow
