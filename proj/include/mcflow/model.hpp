// Diffusion-transformer backbone with summed dual time conditioning,
// modality embeddings and four prediction heads. Forward and reverse mode
// are written out by hand in double precision.
//
// Token embedding:  z_i = Emb(A_i) + Lin(F_i) + Lin(L^l) + Lin(L^a) + PosEmb_i
// Conditioning:     c   = TimeEmb_t(t) + TimeEmb_s(s)
// Blocks:           pre-norm attention + MLP, each norm's shift/scale and each
//                   branch's gate regressed from c (adaLN-Zero).
// Heads:            logits and coordinates per token; lattice from the mean of
//                   the hidden states over real tokens.

#ifndef MCFLOW_MODEL_HPP_
#define MCFLOW_MODEL_HPP_

#include <random>
#include <vector>

#include "mcflow/flow.hpp"
#include "mcflow/params.hpp"

namespace mcflow {

struct ModelConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int mlp_ratio = 4;
  int max_atoms = 24;
  int time_features = 64;  // sinusoidal feature count (even)
  // Network time inputs are clamped to the training clip range.
  double time_clip = 0.9;
  double time_scale = 1000.0;
  // Fixed affine normalization of lattice lengths (angstrom) on input and
  // output; angles use (deg - 90) / 30.
  double length_offset = 4.0;
  double length_scale = 1.0;

  bool operator==(const ModelConfig&) const = default;
};

// Throws InvalidData for inconsistent dimensions.
void validate_model_config(const ModelConfig& c);

struct LayerIds {
  int mod_w, mod_b, qkv_w, qkv_b, out_w, out_b, fc1_w, fc1_b, fc2_w, fc2_b;
};

struct ParamIds {
  int atom_emb, frac_w, frac_b, len_w, len_b, ang_w, ang_b, pos_emb;
  int time_t_w1, time_t_b1, time_t_w2, time_t_b2;
  int time_s_w1, time_s_b1, time_s_w2, time_s_b2;
  std::vector<LayerIds> layers;
  int final_mod_w, final_mod_b;
  int head_atom_w, head_atom_b, head_frac_w, head_frac_b;
  int head_len_w, head_len_b, head_ang_w, head_ang_b;
};

class ModelParams {
public:
  ModelParams() = default;
  // All tensors zero.
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  const ParamIds& ids() const { return ids_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  size_t num_parameters() const { return values_.size(); }

  MatrixView tensor(int id) { return view(values_, layout_.info(id)); }
  ConstMatrixView tensor(int id) const { return view(values_, layout_.info(id)); }

private:
  ModelConfig config_;
  ParamLayout layout_;
  ParamIds ids_{};
  std::vector<double> values_;
};

// Truncated normal (0.02) for embeddings and projections; zeros for biases,
// modulation maps and head output maps.
void initialize_params(ModelParams& params, std::mt19937_64& rng);
// Every tensor ~ N(0, stddev); used to exercise all gradient paths.
void randomize_params(ModelParams& params, std::mt19937_64& rng, double stddev);

// One crystal's network input. `positions` selects positional-embedding rows
// (defaults to 0..N-1).
struct ModelInput {
  AtomTypeState atoms;
  std::vector<Vec3> frac;
  Vec3 lengths = Vec3::Ones();
  Vec3 angles = Vec3::Constant(90);
  JointTime time;
  std::vector<int> positions;

  int num_atoms() const { return static_cast<int>(atoms.size()); }
};

struct LayerCache {
  Eigen::RowVectorXd mod;
  Eigen::MatrixXd x_in, n1, m1, q, k, v, attn, proj, x_mid, n2, m2, pre, act, mlp;
  Eigen::VectorXd rstd1, rstd2;
  std::vector<Eigen::MatrixXd> probs;
};

// Head outputs plus everything backward needs.
struct ForwardPass {
  HeadOutputs out;
  Eigen::MatrixXd hidden;  // h, N x d (input to the heads)
  Eigen::RowVectorXd hidden_mean;

  Eigen::RowVectorXd len_feat, ang_feat;
  Eigen::RowVectorXd feat_t, feat_s, pre_t, pre_s, c, silu_c;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd x_final, n_final;
  Eigen::VectorXd rstd_final;
  Eigen::RowVectorXd final_mod;
};

// Throws SequenceLength when N exceeds max_atoms, NumericFailure on
// non-finite activations (layer -1 = embedding, n_layers = heads).
ForwardPass forward(const ModelParams& params, const ModelInput& input);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(head outputs).
void backward(const ModelParams& params, const ModelInput& input, const ForwardPass& pass,
              const HeadOutputs& adjoint, std::vector<double>& grads);

// Sinusoidal features with frequencies 10000^(-2k/F) of time_scale * time.
Eigen::RowVectorXd time_features(double time, const ModelConfig& config);
// c = TimeEmb_t(t) + TimeEmb_s(s)
Eigen::RowVectorXd condition(const JointTime& time, const ModelParams& params);

// Padded batch. mask[b][i] is true exactly on real sites; padded sites hold
// kPadToken and zero coordinates.
struct BatchInput {
  std::vector<std::vector<int>> atoms;
  std::vector<std::vector<Vec3>> frac;
  std::vector<Vec3> lengths, angles;
  std::vector<JointTime> times;
  std::vector<std::vector<bool>> mask;

  int batch_size() const { return static_cast<int>(atoms.size()); }
  int max_atoms() const { return atoms.empty() ? 0 : static_cast<int>(atoms[0].size()); }
};

BatchInput make_batch(const std::vector<ModelInput>& inputs);
// Real-site view of one batch entry.
ModelInput batch_entry(const BatchInput& batch, int b);

struct BatchOutput {
  std::vector<HeadOutputs> heads;        // padded rows are zero
  std::vector<Eigen::MatrixXd> hidden;   // N_max x d, padded rows zero
};

BatchOutput forward(const BatchInput& batch, const ModelParams& params);
// Adjoints are padded like the outputs; padded rows are ignored.
std::vector<double> backward(const BatchInput& batch, const ModelParams& params,
                             const std::vector<HeadOutputs>& adjoints);

} // namespace mcflow
#endif
