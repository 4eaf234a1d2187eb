#include "mcflow/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mcflow/errors.hpp"

namespace mcflow {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

constexpr double kLayerNormEps = 1e-6;
constexpr double kAngleCenter = 90.0;
constexpr double kAngleScale = 30.0;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RowVectorXd silu(const RowVectorXd& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

RowVectorXd silu_grad(const RowVectorXd& x) {
  return x.unaryExpr([](double v) {
    double s = sigmoid(v);
    return s * (1 + v * (1 - s));
  });
}

constexpr double kGeluC = 0.044715;
const double kGeluK = std::sqrt(2.0 / std::numbers::pi);

double gelu(double x) { return 0.5 * x * (1 + std::tanh(kGeluK * (x + kGeluC * x * x * x))); }

double gelu_grad(double x) {
  double th = std::tanh(kGeluK * (x + kGeluC * x * x * x));
  return 0.5 * (1 + th) + 0.5 * x * (1 - th * th) * kGeluK * (1 + 3 * kGeluC * x * x);
}

// Row-wise normalization without affine parameters.
MatrixXd layer_norm(const MatrixXd& x, VectorXd& rstd) {
  MatrixXd y(x.rows(), x.cols());
  rstd.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = x.row(i).mean();
    RowVectorXd centered = x.row(i).array() - mean;
    double var = centered.squaredNorm() / x.cols();
    rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    y.row(i) = centered * rstd[i];
  }
  return y;
}

MatrixXd layer_norm_backward(const MatrixXd& y, const VectorXd& rstd, const MatrixXd& dy) {
  MatrixXd dx(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    double mean_dy = dy.row(i).mean();
    double mean_dyy = dy.row(i).dot(y.row(i)) / y.cols();
    dx.row(i) = rstd[i] * (dy.row(i).array() - mean_dy - y.row(i).array() * mean_dyy).matrix();
  }
  return dx;
}

// y = x W + b
MatrixXd affine(const MatrixXd& x, const ConstMatrixView& w, const ConstMatrixView& b) {
  MatrixXd y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

// x * (1 + scale) + shift, scale/shift broadcast over rows
MatrixXd modulate(const MatrixXd& x, const RowVectorXd& shift, const RowVectorXd& scale) {
  MatrixXd y = x.array().rowwise() * (scale.array() + 1.0);
  y.rowwise() += shift;
  return y;
}

void check_finite(const MatrixXd& x, int layer) {
  if (!x.allFinite())
    throw NumericFailure("non-finite activation", layer);
}

struct GradAccess {
  const ModelParams& params;
  std::vector<double>& grads;
  MatrixView operator()(int id) { return view(grads, params.layout().info(id)); }
};

void add_linear_grads(GradAccess& g, int w, int b, const MatrixXd& x, const MatrixXd& dy) {
  g(w).noalias() += x.transpose() * dy;
  g(b).row(0) += dy.colwise().sum();
}

} // namespace

void validate_model_config(const ModelConfig& c) {
  if (c.d_model <= 0 || c.n_layers < 0 || c.n_heads <= 0 || c.mlp_ratio <= 0 ||
      c.max_atoms <= 0 || c.time_features <= 0)
    throw InvalidData("model dimensions must be positive");
  if (c.d_model % c.n_heads != 0)
    throw InvalidData("d_model must be divisible by n_heads");
  if (c.time_features % 2 != 0)
    throw InvalidData("time_features must be even");
  if (!(c.length_scale > 0))
    throw InvalidData("length_scale must be positive");
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  validate_model_config(config);
  const int d = config.d_model;
  const int ff = d * config.mlp_ratio;
  const int nf = config.time_features;
  auto& L = layout_;
  ids_.atom_emb = L.add("embed.atom", kNumElements + 1, d);
  ids_.frac_w = L.add("embed.frac.w", 3, d);
  ids_.frac_b = L.add("embed.frac.b", 1, d);
  ids_.len_w = L.add("embed.lengths.w", 3, d);
  ids_.len_b = L.add("embed.lengths.b", 1, d);
  ids_.ang_w = L.add("embed.angles.w", 3, d);
  ids_.ang_b = L.add("embed.angles.b", 1, d);
  ids_.pos_emb = L.add("embed.position", config.max_atoms, d);
  ids_.time_t_w1 = L.add("time_t.w1", nf, d);
  ids_.time_t_b1 = L.add("time_t.b1", 1, d);
  ids_.time_t_w2 = L.add("time_t.w2", d, d);
  ids_.time_t_b2 = L.add("time_t.b2", 1, d);
  ids_.time_s_w1 = L.add("time_s.w1", nf, d);
  ids_.time_s_b1 = L.add("time_s.b1", 1, d);
  ids_.time_s_w2 = L.add("time_s.w2", d, d);
  ids_.time_s_b2 = L.add("time_s.b2", 1, d);
  for (int l = 0; l < config.n_layers; ++l) {
    std::string p = "block" + std::to_string(l) + ".";
    LayerIds li;
    li.mod_w = L.add(p + "mod.w", d, 6 * d);
    li.mod_b = L.add(p + "mod.b", 1, 6 * d);
    li.qkv_w = L.add(p + "attn.qkv.w", d, 3 * d);
    li.qkv_b = L.add(p + "attn.qkv.b", 1, 3 * d);
    li.out_w = L.add(p + "attn.out.w", d, d);
    li.out_b = L.add(p + "attn.out.b", 1, d);
    li.fc1_w = L.add(p + "mlp.fc1.w", d, ff);
    li.fc1_b = L.add(p + "mlp.fc1.b", 1, ff);
    li.fc2_w = L.add(p + "mlp.fc2.w", ff, d);
    li.fc2_b = L.add(p + "mlp.fc2.b", 1, d);
    ids_.layers.push_back(li);
  }
  ids_.final_mod_w = L.add("final.mod.w", d, 2 * d);
  ids_.final_mod_b = L.add("final.mod.b", 1, 2 * d);
  ids_.head_atom_w = L.add("head.atom.w", d, kNumElements);
  ids_.head_atom_b = L.add("head.atom.b", 1, kNumElements);
  ids_.head_frac_w = L.add("head.frac.w", d, 3);
  ids_.head_frac_b = L.add("head.frac.b", 1, 3);
  ids_.head_len_w = L.add("head.lengths.w", d, 3);
  ids_.head_len_b = L.add("head.lengths.b", 1, 3);
  ids_.head_ang_w = L.add("head.angles.w", d, 3);
  ids_.head_ang_b = L.add("head.angles.b", 1, 3);
  values_.assign(L.total_size(), 0.0);
}

void initialize_params(ModelParams& params, std::mt19937_64& rng) {
  std::fill(params.values().begin(), params.values().end(), 0.0);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto trunc_normal = [&](int id) {
    MatrixView m = params.tensor(id);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double v;
      do {
        v = normal(rng);
      } while (std::abs(v) > 0.04);
      m.data()[i] = v;
    }
  };
  const ParamIds& ids = params.ids();
  for (int id : {ids.atom_emb, ids.frac_w, ids.len_w, ids.ang_w, ids.pos_emb, ids.time_t_w1,
                 ids.time_t_w2, ids.time_s_w1, ids.time_s_w2})
    trunc_normal(id);
  for (const LayerIds& l : ids.layers)
    for (int id : {l.qkv_w, l.out_w, l.fc1_w, l.fc2_w})
      trunc_normal(id);
}

void randomize_params(ModelParams& params, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : params.values())
    v = normal(rng);
}

RowVectorXd time_features(double time, const ModelConfig& config) {
  const int half = config.time_features / 2;
  RowVectorXd f(config.time_features);
  double x = config.time_scale * time;
  for (int k = 0; k < half; ++k) {
    double freq = std::pow(10000.0, -2.0 * k / config.time_features);
    f[k] = std::cos(x * freq);
    f[half + k] = std::sin(x * freq);
  }
  return f;
}

namespace {

double network_time(double time, const ModelConfig& c) { return std::clamp(time, 0.0, c.time_clip); }

RowVectorXd time_mlp_pre(const ModelParams& p, int w1, int b1, const RowVectorXd& feat) {
  return feat * p.tensor(w1) + p.tensor(b1).row(0);
}

RowVectorXd time_mlp_out(const ModelParams& p, int w2, int b2, const RowVectorXd& pre) {
  return silu(pre) * p.tensor(w2) + p.tensor(b2).row(0);
}

} // namespace

RowVectorXd condition(const JointTime& time, const ModelParams& params) {
  const ModelConfig& cfg = params.config();
  const ParamIds& ids = params.ids();
  RowVectorXd ft = time_features(network_time(time.t, cfg), cfg);
  RowVectorXd fs = time_features(network_time(time.s, cfg), cfg);
  return time_mlp_out(params, ids.time_t_w2, ids.time_t_b2,
                      time_mlp_pre(params, ids.time_t_w1, ids.time_t_b1, ft)) +
         time_mlp_out(params, ids.time_s_w2, ids.time_s_b2,
                      time_mlp_pre(params, ids.time_s_w1, ids.time_s_b1, fs));
}

ForwardPass forward(const ModelParams& params, const ModelInput& in) {
  const ModelConfig& cfg = params.config();
  const ParamIds& ids = params.ids();
  const int n = in.num_atoms();
  const int d = cfg.d_model;
  if (n < 1)
    throw InvalidData("forward: empty crystal");
  if (n > cfg.max_atoms)
    throw SequenceLength("crystal has " + std::to_string(n) + " sites, model supports " +
                         std::to_string(cfg.max_atoms));
  if (static_cast<int>(in.frac.size()) != n)
    throw InvalidData("forward: coordinate count mismatch");

  ForwardPass fp;

  // embedding
  MatrixXd frac(n, 3);
  for (int i = 0; i < n; ++i)
    frac.row(i) = in.frac[i].transpose();
  fp.len_feat = ((in.lengths.array() - cfg.length_offset) / cfg.length_scale).matrix().transpose();
  fp.ang_feat = ((in.angles.array() - kAngleCenter) / kAngleScale).matrix().transpose();
  RowVectorXd lattice_row = affine(fp.len_feat, params.tensor(ids.len_w), params.tensor(ids.len_b)) +
                            affine(fp.ang_feat, params.tensor(ids.ang_w), params.tensor(ids.ang_b));
  MatrixXd x = affine(frac, params.tensor(ids.frac_w), params.tensor(ids.frac_b));
  x.rowwise() += lattice_row;
  ConstMatrixView atom_emb = params.tensor(ids.atom_emb);
  ConstMatrixView pos_emb = params.tensor(ids.pos_emb);
  for (int i = 0; i < n; ++i) {
    int a = in.atoms[i];
    if (a < 0 || a > kMaskToken)
      throw InvalidData("forward: invalid atom state " + std::to_string(a));
    int pos = in.positions.empty() ? i : in.positions[i];
    if (pos < 0 || pos >= cfg.max_atoms)
      throw SequenceLength("position index " + std::to_string(pos) + " out of range");
    x.row(i) += atom_emb.row(a) + pos_emb.row(pos);
  }
  check_finite(x, -1);

  // conditioning
  fp.feat_t = time_features(network_time(in.time.t, cfg), cfg);
  fp.feat_s = time_features(network_time(in.time.s, cfg), cfg);
  fp.pre_t = time_mlp_pre(params, ids.time_t_w1, ids.time_t_b1, fp.feat_t);
  fp.pre_s = time_mlp_pre(params, ids.time_s_w1, ids.time_s_b1, fp.feat_s);
  fp.c = time_mlp_out(params, ids.time_t_w2, ids.time_t_b2, fp.pre_t) +
         time_mlp_out(params, ids.time_s_w2, ids.time_s_b2, fp.pre_s);
  fp.silu_c = silu(fp.c);

  const int heads = cfg.n_heads;
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerIds& li = ids.layers[l];
    LayerCache lc;
    lc.mod = fp.silu_c * params.tensor(li.mod_w) + params.tensor(li.mod_b).row(0);
    RowVectorXd shift1 = lc.mod.segment(0, d), scale1 = lc.mod.segment(d, d),
                gate1 = lc.mod.segment(2 * d, d), shift2 = lc.mod.segment(3 * d, d),
                scale2 = lc.mod.segment(4 * d, d), gate2 = lc.mod.segment(5 * d, d);
    lc.x_in = x;
    lc.n1 = layer_norm(x, lc.rstd1);
    lc.m1 = modulate(lc.n1, shift1, scale1);
    MatrixXd qkv = affine(lc.m1, params.tensor(li.qkv_w), params.tensor(li.qkv_b));
    lc.q = qkv.leftCols(d);
    lc.k = qkv.middleCols(d, d);
    lc.v = qkv.rightCols(d);
    lc.attn.resize(n, d);
    lc.probs.resize(heads);
    for (int h = 0; h < heads; ++h) {
      MatrixXd scores = lc.q.middleCols(h * dh, dh) * lc.k.middleCols(h * dh, dh).transpose();
      scores *= inv_sqrt;
      for (int i = 0; i < n; ++i) {
        double mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp();
        scores.row(i) /= scores.row(i).sum();
      }
      lc.attn.middleCols(h * dh, dh) = scores * lc.v.middleCols(h * dh, dh);
      lc.probs[h] = std::move(scores);
    }
    lc.proj = affine(lc.attn, params.tensor(li.out_w), params.tensor(li.out_b));
    x = x + (lc.proj.array().rowwise() * gate1.array()).matrix();
    lc.x_mid = x;
    lc.n2 = layer_norm(x, lc.rstd2);
    lc.m2 = modulate(lc.n2, shift2, scale2);
    lc.pre = affine(lc.m2, params.tensor(li.fc1_w), params.tensor(li.fc1_b));
    lc.act = lc.pre.unaryExpr([](double v) { return gelu(v); });
    lc.mlp = affine(lc.act, params.tensor(li.fc2_w), params.tensor(li.fc2_b));
    x = x + (lc.mlp.array().rowwise() * gate2.array()).matrix();
    check_finite(x, l);
    fp.layers.push_back(std::move(lc));
  }

  fp.final_mod = fp.silu_c * params.tensor(ids.final_mod_w) + params.tensor(ids.final_mod_b).row(0);
  fp.x_final = x;
  fp.n_final = layer_norm(x, fp.rstd_final);
  fp.hidden = modulate(fp.n_final, fp.final_mod.segment(0, d), fp.final_mod.segment(d, d));
  fp.hidden_mean = fp.hidden.colwise().mean();

  fp.out.logits = affine(fp.hidden, params.tensor(ids.head_atom_w), params.tensor(ids.head_atom_b));
  fp.out.frac = affine(fp.hidden, params.tensor(ids.head_frac_w), params.tensor(ids.head_frac_b));
  RowVectorXd len_out = affine(fp.hidden_mean, params.tensor(ids.head_len_w), params.tensor(ids.head_len_b));
  RowVectorXd ang_out = affine(fp.hidden_mean, params.tensor(ids.head_ang_w), params.tensor(ids.head_ang_b));
  // Lattice heads predict displacements from the current state.
  fp.out.lengths = in.lengths + cfg.length_scale * len_out.transpose();
  fp.out.angles = in.angles + kAngleScale * ang_out.transpose();
  check_finite(fp.out.logits, cfg.n_layers);
  check_finite(fp.out.frac, cfg.n_layers);
  if (!fp.out.lengths.allFinite() || !fp.out.angles.allFinite())
    throw NumericFailure("non-finite lattice prediction", cfg.n_layers);
  return fp;
}

void backward(const ModelParams& params, const ModelInput& in, const ForwardPass& fp,
              const HeadOutputs& adj, std::vector<double>& grads) {
  const ModelConfig& cfg = params.config();
  const ParamIds& ids = params.ids();
  const int n = in.num_atoms();
  const int d = cfg.d_model;
  if (grads.size() != params.num_parameters())
    grads.assign(params.num_parameters(), 0.0);
  GradAccess g{params, grads};

  // heads
  RowVectorXd d_len_out = cfg.length_scale * adj.lengths.transpose();
  RowVectorXd d_ang_out = kAngleScale * adj.angles.transpose();
  add_linear_grads(g, ids.head_len_w, ids.head_len_b, fp.hidden_mean, d_len_out);
  add_linear_grads(g, ids.head_ang_w, ids.head_ang_b, fp.hidden_mean, d_ang_out);
  RowVectorXd d_mean = d_len_out * params.tensor(ids.head_len_w).transpose() +
                       d_ang_out * params.tensor(ids.head_ang_w).transpose();
  add_linear_grads(g, ids.head_atom_w, ids.head_atom_b, fp.hidden, adj.logits);
  add_linear_grads(g, ids.head_frac_w, ids.head_frac_b, fp.hidden, adj.frac);
  MatrixXd dh = adj.logits * params.tensor(ids.head_atom_w).transpose() +
                adj.frac * params.tensor(ids.head_frac_w).transpose();
  dh.rowwise() += d_mean / static_cast<double>(n);

  // final modulated norm
  RowVectorXd d_silu_c = RowVectorXd::Zero(d);
  {
    RowVectorXd scale = fp.final_mod.segment(d, d);
    RowVectorXd d_mod(2 * d);
    d_mod.segment(0, d) = dh.colwise().sum();
    d_mod.segment(d, d) = (dh.array() * fp.n_final.array()).colwise().sum();
    g(ids.final_mod_w).noalias() += fp.silu_c.transpose() * d_mod;
    g(ids.final_mod_b).row(0) += d_mod;
    d_silu_c += d_mod * params.tensor(ids.final_mod_w).transpose();
    MatrixXd dn = dh.array().rowwise() * (scale.array() + 1.0);
    dh = layer_norm_backward(fp.n_final, fp.rstd_final, dn);
  }

  MatrixXd dx = std::move(dh);
  const int heads = cfg.n_heads;
  const int hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerIds& li = ids.layers[l];
    const LayerCache& lc = fp.layers[l];
    RowVectorXd scale1 = lc.mod.segment(d, d), gate1 = lc.mod.segment(2 * d, d),
                scale2 = lc.mod.segment(4 * d, d), gate2 = lc.mod.segment(5 * d, d);
    RowVectorXd d_mod(6 * d);

    // MLP branch
    MatrixXd d_mlp = dx.array().rowwise() * gate2.array();
    d_mod.segment(5 * d, d) = (dx.array() * lc.mlp.array()).colwise().sum();
    add_linear_grads(g, li.fc2_w, li.fc2_b, lc.act, d_mlp);
    MatrixXd d_act = d_mlp * params.tensor(li.fc2_w).transpose();
    MatrixXd d_pre = d_act.array() * lc.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    add_linear_grads(g, li.fc1_w, li.fc1_b, lc.m2, d_pre);
    MatrixXd d_m2 = d_pre * params.tensor(li.fc1_w).transpose();
    d_mod.segment(3 * d, d) = d_m2.colwise().sum();
    d_mod.segment(4 * d, d) = (d_m2.array() * lc.n2.array()).colwise().sum();
    MatrixXd d_n2 = d_m2.array().rowwise() * (scale2.array() + 1.0);
    dx += layer_norm_backward(lc.n2, lc.rstd2, d_n2);

    // attention branch
    MatrixXd d_proj = dx.array().rowwise() * gate1.array();
    d_mod.segment(2 * d, d) = (dx.array() * lc.proj.array()).colwise().sum();
    add_linear_grads(g, li.out_w, li.out_b, lc.attn, d_proj);
    MatrixXd d_attn = d_proj * params.tensor(li.out_w).transpose();
    MatrixXd d_qkv(n, 3 * d);
    for (int h = 0; h < heads; ++h) {
      const MatrixXd& p = lc.probs[h];
      MatrixXd d_out_h = d_attn.middleCols(h * hd, hd);
      MatrixXd dp = d_out_h * lc.v.middleCols(h * hd, hd).transpose();
      MatrixXd ds(n, n);
      for (int i = 0; i < n; ++i) {
        double dot = dp.row(i).dot(p.row(i));
        ds.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
      }
      ds *= inv_sqrt;
      d_qkv.middleCols(h * hd, hd) = ds * lc.k.middleCols(h * hd, hd);
      d_qkv.middleCols(d + h * hd, hd) = ds.transpose() * lc.q.middleCols(h * hd, hd);
      d_qkv.middleCols(2 * d + h * hd, hd) = p.transpose() * d_out_h;
    }
    add_linear_grads(g, li.qkv_w, li.qkv_b, lc.m1, d_qkv);
    MatrixXd d_m1 = d_qkv * params.tensor(li.qkv_w).transpose();
    d_mod.segment(0, d) = d_m1.colwise().sum();
    d_mod.segment(d, d) = (d_m1.array() * lc.n1.array()).colwise().sum();
    MatrixXd d_n1 = d_m1.array().rowwise() * (scale1.array() + 1.0);
    dx += layer_norm_backward(lc.n1, lc.rstd1, d_n1);

    g(li.mod_w).noalias() += fp.silu_c.transpose() * d_mod;
    g(li.mod_b).row(0) += d_mod;
    d_silu_c += d_mod * params.tensor(li.mod_w).transpose();
  }

  // embeddings
  MatrixXd frac(n, 3);
  for (int i = 0; i < n; ++i)
    frac.row(i) = in.frac[i].transpose();
  add_linear_grads(g, ids.frac_w, ids.frac_b, frac, dx);
  RowVectorXd d_lattice = dx.colwise().sum();
  add_linear_grads(g, ids.len_w, ids.len_b, fp.len_feat, d_lattice);
  add_linear_grads(g, ids.ang_w, ids.ang_b, fp.ang_feat, d_lattice);
  MatrixView d_atom = g(ids.atom_emb);
  MatrixView d_pos = g(ids.pos_emb);
  for (int i = 0; i < n; ++i) {
    d_atom.row(in.atoms[i]) += dx.row(i);
    d_pos.row(in.positions.empty() ? i : in.positions[i]) += dx.row(i);
  }

  // conditioning
  RowVectorXd dc = d_silu_c.cwiseProduct(silu_grad(fp.c));
  auto time_backward = [&](int w1, int b1, int w2, int b2, const RowVectorXd& feat,
                           const RowVectorXd& pre) {
    add_linear_grads(g, w2, b2, silu(pre), dc);
    RowVectorXd d_pre = (dc * params.tensor(w2).transpose()).cwiseProduct(silu_grad(pre));
    add_linear_grads(g, w1, b1, feat, d_pre);
  };
  time_backward(ids.time_t_w1, ids.time_t_b1, ids.time_t_w2, ids.time_t_b2, fp.feat_t, fp.pre_t);
  time_backward(ids.time_s_w1, ids.time_s_b1, ids.time_s_w2, ids.time_s_b2, fp.feat_s, fp.pre_s);
}

BatchInput make_batch(const std::vector<ModelInput>& inputs) {
  BatchInput b;
  int n_max = 0;
  for (const ModelInput& in : inputs)
    n_max = std::max(n_max, in.num_atoms());
  for (const ModelInput& in : inputs) {
    int n = in.num_atoms();
    std::vector<int> atoms(in.atoms);
    atoms.resize(n_max, kPadToken);
    std::vector<Vec3> frac(in.frac);
    frac.resize(n_max, Vec3::Zero());
    std::vector<bool> mask(n_max, false);
    std::fill(mask.begin(), mask.begin() + n, true);
    b.atoms.push_back(std::move(atoms));
    b.frac.push_back(std::move(frac));
    b.lengths.push_back(in.lengths);
    b.angles.push_back(in.angles);
    b.times.push_back(in.time);
    b.mask.push_back(std::move(mask));
  }
  return b;
}

ModelInput batch_entry(const BatchInput& batch, int b) {
  ModelInput in;
  for (size_t i = 0; i < batch.mask[b].size(); ++i) {
    if (!batch.mask[b][i])
      continue;
    in.atoms.push_back(batch.atoms[b][i]);
    in.frac.push_back(batch.frac[b][i]);
    in.positions.push_back(static_cast<int>(i));
  }
  in.lengths = batch.lengths[b];
  in.angles = batch.angles[b];
  in.time = batch.times[b];
  return in;
}

BatchOutput forward(const BatchInput& batch, const ModelParams& params) {
  BatchOutput out;
  const int n_max = batch.max_atoms();
  for (int b = 0; b < batch.batch_size(); ++b) {
    ModelInput in = batch_entry(batch, b);
    ForwardPass fp = forward(params, in);
    HeadOutputs h = HeadOutputs::zeros(n_max);
    MatrixXd hidden = MatrixXd::Zero(n_max, params.config().d_model);
    for (int i = 0; i < in.num_atoms(); ++i) {
      int pos = in.positions[i];
      h.logits.row(pos) = fp.out.logits.row(i);
      h.frac.row(pos) = fp.out.frac.row(i);
      hidden.row(pos) = fp.hidden.row(i);
    }
    h.lengths = fp.out.lengths;
    h.angles = fp.out.angles;
    out.heads.push_back(std::move(h));
    out.hidden.push_back(std::move(hidden));
  }
  return out;
}

std::vector<double> backward(const BatchInput& batch, const ModelParams& params,
                             const std::vector<HeadOutputs>& adjoints) {
  std::vector<double> grads(params.num_parameters(), 0.0);
  for (int b = 0; b < batch.batch_size(); ++b) {
    ModelInput in = batch_entry(batch, b);
    ForwardPass fp = forward(params, in);
    HeadOutputs adj = HeadOutputs::zeros(in.num_atoms());
    for (int i = 0; i < in.num_atoms(); ++i) {
      adj.logits.row(i) = adjoints[b].logits.row(in.positions[i]);
      adj.frac.row(i) = adjoints[b].frac.row(in.positions[i]);
    }
    adj.lengths = adjoints[b].lengths;
    adj.angles = adjoints[b].angles;
    backward(params, in, fp, adj, grads);
  }
  return grads;
}

} // namespace mcflow
