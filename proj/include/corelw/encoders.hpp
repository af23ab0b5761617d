#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace corelw {

enum class EncoderKind { cnn, lstm, bilstm };

EncoderKind encoder_kind_from_string(const std::string& s);
const char* encoder_kind_name(EncoderKind k);

// Window encoder: support point t is the concatenation of the embedding
// columns t-l..t+l (zero-padded at the boundaries) mapped through S plus
// bias g.
struct CnnParams {
  Eigen::MatrixXd S;  // (2l+1)*d_w x d_c
  Eigen::VectorXd g;  // d_c
  int half_window = 1;

  int d_w() const { return static_cast<int>(S.rows()) / (2 * half_window + 1); }
  int d_c() const { return static_cast<int>(S.cols()); }
};

struct LstmParams {
  Eigen::MatrixXd U_i, U_f, U_o, U_g;  // d_w x d_h
  Eigen::MatrixXd W_i, W_f, W_o, W_g;  // d_h x d_h
  Eigen::VectorXd b_i, b_f, b_o, b_c;  // d_h

  int d_w() const { return static_cast<int>(U_i.rows()); }
  int d_h() const { return static_cast<int>(U_i.cols()); }
};

// Per-feature normalization over all support points of a mini-batch with
// learned scale/shift; running statistics are used at inference.
struct BatchNormParams {
  Eigen::VectorXd gamma, beta;
  Eigen::VectorXd running_mean, running_var;
  double momentum = 0.9;
  double eps = 1e-5;
};

struct EncoderConfig {
  EncoderKind kind = EncoderKind::cnn;
  int d_w = 300;
  int d_h = 300;
  int d_c = 300;
  int window = 3;  // 2l+1, must be odd
  std::uint64_t init_seed = 1;
  bool paper_exact_cell = false;
  bool batch_norm = true;

  int half_window() const { return (window - 1) / 2; }
  void validate() const;
};

struct EncoderParams {
  EncoderConfig config;
  std::optional<CnnParams> cnn;
  std::optional<LstmParams> lstm_fwd;
  std::optional<LstmParams> lstm_bwd;
  std::optional<BatchNormParams> bn;

  int d_out() const;
};

// Glorot-uniform tensors from the config seed; biases included, BN at
// identity.
EncoderParams init_encoder(const EncoderConfig& config);

// Gradient container with the same tensor shapes, all zero.
EncoderParams zeros_like(const EncoderParams& params);

// Stable-ordered view over every trainable scalar, shared by the Adam
// update and the checkpoint writer.
struct TensorView {
  std::string name;
  double* data;
  std::size_t size;
  std::vector<long> shape;
};
std::vector<TensorView> tensor_views(EncoderParams& params);

struct EncoderOutput {
  Eigen::MatrixXd points;  // d_out x N
  std::string doc_id;
};

// Saved forward activations needed by backpropagation through time.
struct LstmTrace {
  Eigen::MatrixXd i, f, o, g;  // gates, d_h x N
  Eigen::MatrixXd cell;        // C_t
  Eigen::MatrixXd cell_pre;    // f*C_{t-1} + i*g (pre-sigma when paper_exact)
  Eigen::MatrixXd h;           // hidden states
};

EncoderOutput cnn_forward(const Eigen::MatrixXd& x, const CnnParams& params);
void cnn_backward(const Eigen::MatrixXd& x, const CnnParams& params,
                  const Eigen::MatrixXd& upstream, CnnParams& grads,
                  Eigen::MatrixXd* dx = nullptr);

EncoderOutput lstm_forward(const Eigen::MatrixXd& x, const LstmParams& params,
                           bool paper_exact_cell, LstmTrace* trace = nullptr);
void lstm_backward(const Eigen::MatrixXd& x, const LstmParams& params,
                   const LstmTrace& trace, const Eigen::MatrixXd& upstream,
                   bool paper_exact_cell, LstmParams& grads,
                   Eigen::MatrixXd* dx = nullptr);

EncoderOutput bilstm_forward(const Eigen::MatrixXd& x, const LstmParams& fwd,
                             const LstmParams& bwd, bool paper_exact_cell,
                             LstmTrace* trace_fwd = nullptr,
                             LstmTrace* trace_bwd = nullptr);

// Unified dispatch used by the training loop. Traces are only filled for
// recurrent encoders.
struct EncodeTrace {
  LstmTrace fwd, bwd;
};
EncoderOutput encode(const EncoderParams& params, const Eigen::MatrixXd& x,
                     const std::string& doc_id, EncodeTrace* trace = nullptr);
void encode_backward(const EncoderParams& params, const Eigen::MatrixXd& x,
                     const EncodeTrace& trace, const Eigen::MatrixXd& upstream,
                     EncoderParams& grads, Eigen::MatrixXd* dx = nullptr);

// --- batch normalization over a set of support-point matrices ---

struct BatchNormTrace {
  Eigen::VectorXd mean, var;       // batch statistics
  Eigen::VectorXd inv_std;         // 1/sqrt(var + eps)
  std::size_t count = 0;           // number of support points (with multiplicity)
};

// Normalizes each matrix in `points` in place using statistics pooled over
// all of them; `multiplicity[k]` counts how many batch roles matrix k
// serves (stat weight). Updates running statistics when `update_running`.
BatchNormTrace batch_norm_forward(BatchNormParams& bn,
                                  std::vector<Eigen::MatrixXd*>& points,
                                  const std::vector<double>& multiplicity,
                                  bool update_running);

// Maps upstream gradients on the normalized outputs back to gradients on
// the raw encoder outputs plus dgamma/dbeta. `raw` are the pre-norm
// matrices, `upstream` aligned with `raw`.
void batch_norm_backward(const BatchNormParams& bn, const BatchNormTrace& trace,
                         const std::vector<Eigen::MatrixXd*>& raw,
                         const std::vector<double>& multiplicity,
                         std::vector<Eigen::MatrixXd>& upstream,
                         Eigen::VectorXd& dgamma, Eigen::VectorXd& dbeta);

// Inference-time transform with frozen running statistics.
void batch_norm_apply_running(const BatchNormParams& bn, Eigen::MatrixXd& points);

}  // namespace corelw
