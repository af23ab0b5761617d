#include "corelw/encoders.hpp"

#include <cmath>

#include "corelw/error.hpp"
#include "corelw/rng.hpp"

namespace corelw {

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "cnn") return EncoderKind::cnn;
  if (s == "lstm") return EncoderKind::lstm;
  if (s == "bilstm") return EncoderKind::bilstm;
  throw ConfigError("unknown encoder kind '" + s + "' (expected cnn, lstm or bilstm)");
}

const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::cnn: return "cnn";
    case EncoderKind::lstm: return "lstm";
    case EncoderKind::bilstm: return "bilstm";
  }
  return "?";
}

void EncoderConfig::validate() const {
  if (d_w < 1) throw ConfigError("d_w must be >= 1");
  if (window < 1 || window % 2 == 0) throw ConfigError("window size must be odd and >= 1");
  if (kind == EncoderKind::cnn && d_c < 1) throw ConfigError("d_c must be >= 1");
  if (kind != EncoderKind::cnn && d_h < 1) throw ConfigError("d_h must be >= 1");
}

int EncoderParams::d_out() const {
  switch (config.kind) {
    case EncoderKind::cnn: return config.d_c;
    case EncoderKind::lstm: return config.d_h;
    case EncoderKind::bilstm: return 2 * config.d_h;
  }
  return 0;
}

namespace {

void glorot_fill(Eigen::Ref<Eigen::MatrixXd> m, double fan_in, double fan_out, Rng& rng) {
  const double r = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index row = 0; row < m.rows(); ++row) {
      m(row, c) = rng.uniform(-r, r);
    }
  }
}

LstmParams init_lstm(int d_w, int d_h, Rng& rng) {
  LstmParams p;
  for (Eigen::MatrixXd* u : {&p.U_i, &p.U_f, &p.U_o, &p.U_g}) {
    u->resize(d_w, d_h);
    glorot_fill(*u, d_w, d_h, rng);
  }
  for (Eigen::MatrixXd* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_g}) {
    w->resize(d_h, d_h);
    glorot_fill(*w, d_h, d_h, rng);
  }
  for (Eigen::VectorXd* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) {
    b->resize(d_h);
    glorot_fill(*b, 1.0, d_h, rng);
  }
  return p;
}

LstmParams zeros_lstm(int d_w, int d_h) {
  LstmParams p;
  for (Eigen::MatrixXd* u : {&p.U_i, &p.U_f, &p.U_o, &p.U_g}) {
    *u = Eigen::MatrixXd::Zero(d_w, d_h);
  }
  for (Eigen::MatrixXd* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_g}) {
    *w = Eigen::MatrixXd::Zero(d_h, d_h);
  }
  for (Eigen::VectorXd* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) {
    *b = Eigen::VectorXd::Zero(d_h);
  }
  return p;
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& config) {
  config.validate();
  EncoderParams params;
  params.config = config;
  Rng rng(config.init_seed ^ 0x5bf03635ULL);
  const int l = config.half_window();
  if (config.kind == EncoderKind::cnn) {
    CnnParams cnn;
    cnn.half_window = l;
    cnn.S.resize((2 * l + 1) * config.d_w, config.d_c);
    glorot_fill(cnn.S, cnn.S.rows(), cnn.S.cols(), rng);
    cnn.g.resize(config.d_c);
    glorot_fill(cnn.g, 1.0, config.d_c, rng);
    params.cnn = std::move(cnn);
  } else {
    params.lstm_fwd = init_lstm(config.d_w, config.d_h, rng);
    if (config.kind == EncoderKind::bilstm) {
      params.lstm_bwd = init_lstm(config.d_w, config.d_h, rng);
    }
  }
  if (config.batch_norm) {
    BatchNormParams bn;
    const int d = params.d_out();
    bn.gamma = Eigen::VectorXd::Ones(d);
    bn.beta = Eigen::VectorXd::Zero(d);
    bn.running_mean = Eigen::VectorXd::Zero(d);
    bn.running_var = Eigen::VectorXd::Ones(d);
    params.bn = std::move(bn);
  }
  return params;
}

EncoderParams zeros_like(const EncoderParams& src) {
  EncoderParams params;
  params.config = src.config;
  if (src.cnn) {
    CnnParams cnn;
    cnn.half_window = src.cnn->half_window;
    cnn.S = Eigen::MatrixXd::Zero(src.cnn->S.rows(), src.cnn->S.cols());
    cnn.g = Eigen::VectorXd::Zero(src.cnn->g.size());
    params.cnn = std::move(cnn);
  }
  if (src.lstm_fwd) params.lstm_fwd = zeros_lstm(src.lstm_fwd->d_w(), src.lstm_fwd->d_h());
  if (src.lstm_bwd) params.lstm_bwd = zeros_lstm(src.lstm_bwd->d_w(), src.lstm_bwd->d_h());
  if (src.bn) {
    BatchNormParams bn;
    bn.gamma = Eigen::VectorXd::Zero(src.bn->gamma.size());
    bn.beta = Eigen::VectorXd::Zero(src.bn->beta.size());
    bn.running_mean = Eigen::VectorXd::Zero(src.bn->running_mean.size());
    bn.running_var = Eigen::VectorXd::Zero(src.bn->running_var.size());
    bn.momentum = src.bn->momentum;
    bn.eps = src.bn->eps;
    params.bn = std::move(bn);
  }
  return params;
}

namespace {

void add_matrix_view(std::vector<TensorView>& views, const std::string& name,
                     Eigen::MatrixXd& m) {
  views.push_back({name, m.data(), static_cast<std::size_t>(m.size()),
                   {static_cast<long>(m.rows()), static_cast<long>(m.cols())}});
}

void add_vector_view(std::vector<TensorView>& views, const std::string& name,
                     Eigen::VectorXd& v) {
  views.push_back({name, v.data(), static_cast<std::size_t>(v.size()),
                   {static_cast<long>(v.size())}});
}

void add_lstm_views(std::vector<TensorView>& views, const std::string& prefix,
                    LstmParams& p) {
  add_matrix_view(views, prefix + ".U_i", p.U_i);
  add_matrix_view(views, prefix + ".U_f", p.U_f);
  add_matrix_view(views, prefix + ".U_o", p.U_o);
  add_matrix_view(views, prefix + ".U_g", p.U_g);
  add_matrix_view(views, prefix + ".W_i", p.W_i);
  add_matrix_view(views, prefix + ".W_f", p.W_f);
  add_matrix_view(views, prefix + ".W_o", p.W_o);
  add_matrix_view(views, prefix + ".W_g", p.W_g);
  add_vector_view(views, prefix + ".b_i", p.b_i);
  add_vector_view(views, prefix + ".b_f", p.b_f);
  add_vector_view(views, prefix + ".b_o", p.b_o);
  add_vector_view(views, prefix + ".b_c", p.b_c);
}

}  // namespace

std::vector<TensorView> tensor_views(EncoderParams& params) {
  std::vector<TensorView> views;
  if (params.cnn) {
    add_matrix_view(views, "cnn.S", params.cnn->S);
    add_vector_view(views, "cnn.g", params.cnn->g);
  }
  if (params.lstm_fwd) add_lstm_views(views, "lstm_fwd", *params.lstm_fwd);
  if (params.lstm_bwd) add_lstm_views(views, "lstm_bwd", *params.lstm_bwd);
  if (params.bn) {
    add_vector_view(views, "bn.gamma", params.bn->gamma);
    add_vector_view(views, "bn.beta", params.bn->beta);
  }
  return views;
}

// --- CNN ---

namespace {

// Stacked window matrix: block row (off + l) holds X shifted by off, with
// zero columns past the boundaries.
Eigen::MatrixXd window_stack(const Eigen::MatrixXd& x, int l) {
  const Eigen::Index d = x.rows();
  const Eigen::Index n = x.cols();
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero((2 * l + 1) * d, n);
  for (int off = -l; off <= l; ++off) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, -off);
    const Eigen::Index hi = std::min<Eigen::Index>(n, n - off);
    if (lo >= hi) continue;
    stacked.block((off + l) * d, lo, d, hi - lo) = x.block(0, lo + off, d, hi - lo);
  }
  return stacked;
}

}  // namespace

EncoderOutput cnn_forward(const Eigen::MatrixXd& x, const CnnParams& params) {
  const int l = params.half_window;
  if (x.rows() * (2 * l + 1) != params.S.rows()) {
    throw ConfigError("cnn_forward: embedding dim " + std::to_string(x.rows()) +
                      " does not match S rows " + std::to_string(params.S.rows()) +
                      " for window " + std::to_string(2 * l + 1));
  }
  EncoderOutput out;
  out.points = params.S.transpose() * window_stack(x, l);
  out.points.colwise() += params.g;
  return out;
}

void cnn_backward(const Eigen::MatrixXd& x, const CnnParams& params,
                  const Eigen::MatrixXd& upstream, CnnParams& grads,
                  Eigen::MatrixXd* dx) {
  const int l = params.half_window;
  if (upstream.rows() != params.S.cols() || upstream.cols() != x.cols()) {
    throw InternalError("cnn_backward: upstream shape mismatch");
  }
  const Eigen::MatrixXd stacked = window_stack(x, l);
  grads.S.noalias() += stacked * upstream.transpose();
  grads.g.noalias() += upstream.rowwise().sum();
  if (dx != nullptr) {
    const Eigen::Index d = x.rows();
    const Eigen::Index n = x.cols();
    const Eigen::MatrixXd dstacked = params.S * upstream;  // (2l+1)d x N
    dx->setZero(d, n);
    for (int off = -l; off <= l; ++off) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, -off);
      const Eigen::Index hi = std::min<Eigen::Index>(n, n - off);
      if (lo >= hi) continue;
      dx->block(0, lo + off, d, hi - lo) += dstacked.block((off + l) * d, lo, d, hi - lo);
    }
  }
}

// --- LSTM ---

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& a) {
  return 1.0 / (1.0 + (-a).exp());
}

}  // namespace

EncoderOutput lstm_forward(const Eigen::MatrixXd& x, const LstmParams& params,
                           bool paper_exact_cell, LstmTrace* trace) {
  if (x.rows() != params.U_i.rows()) {
    throw ConfigError("lstm_forward: embedding dim " + std::to_string(x.rows()) +
                      " does not match U rows " + std::to_string(params.U_i.rows()));
  }
  const Eigen::Index n = x.cols();
  const Eigen::Index dh = params.d_h();

  Eigen::MatrixXd h(dh, n);
  Eigen::MatrixXd gates_i, gates_f, gates_o, gates_g, cell, cell_pre;
  if (trace != nullptr) {
    gates_i.resize(dh, n);
    gates_f.resize(dh, n);
    gates_o.resize(dh, n);
    gates_g.resize(dh, n);
    cell.resize(dh, n);
    cell_pre.resize(dh, n);
  }

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(dh);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(dh);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::VectorXd xt = x.col(t);
    const Eigen::ArrayXd i_t =
        sigmoid((params.U_i.transpose() * xt + params.W_i.transpose() * h_prev + params.b_i).array());
    const Eigen::ArrayXd f_t =
        sigmoid((params.U_f.transpose() * xt + params.W_f.transpose() * h_prev + params.b_f).array());
    const Eigen::ArrayXd o_t =
        sigmoid((params.U_o.transpose() * xt + params.W_o.transpose() * h_prev + params.b_o).array());
    const Eigen::ArrayXd g_t =
        (params.U_g.transpose() * xt + params.W_g.transpose() * h_prev + params.b_c).array().tanh();
    const Eigen::ArrayXd s_t = f_t * c_prev.array() + i_t * g_t;
    const Eigen::ArrayXd c_t = paper_exact_cell ? sigmoid(s_t) : s_t;
    const Eigen::ArrayXd h_t = c_t.tanh() * o_t;

    if (trace != nullptr) {
      gates_i.col(t) = i_t;
      gates_f.col(t) = f_t;
      gates_o.col(t) = o_t;
      gates_g.col(t) = g_t;
      cell.col(t) = c_t;
      cell_pre.col(t) = s_t;
    }
    h.col(t) = h_t;
    h_prev = h_t.matrix();
    c_prev = c_t.matrix();
  }

  if (trace != nullptr) {
    trace->i = std::move(gates_i);
    trace->f = std::move(gates_f);
    trace->o = std::move(gates_o);
    trace->g = std::move(gates_g);
    trace->cell = std::move(cell);
    trace->cell_pre = std::move(cell_pre);
    trace->h = h;
  }
  EncoderOutput out;
  out.points = std::move(h);
  return out;
}

void lstm_backward(const Eigen::MatrixXd& x, const LstmParams& params,
                   const LstmTrace& trace, const Eigen::MatrixXd& upstream,
                   bool paper_exact_cell, LstmParams& grads, Eigen::MatrixXd* dx) {
  const Eigen::Index n = x.cols();
  const Eigen::Index dh = params.d_h();
  if (upstream.rows() != dh || upstream.cols() != n) {
    throw InternalError("lstm_backward: upstream shape mismatch");
  }
  if (dx != nullptr) dx->setZero(x.rows(), n);

  Eigen::ArrayXd dh_rec = Eigen::ArrayXd::Zero(dh);
  Eigen::ArrayXd dc_rec = Eigen::ArrayXd::Zero(dh);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const Eigen::ArrayXd i_t = trace.i.col(t).array();
    const Eigen::ArrayXd f_t = trace.f.col(t).array();
    const Eigen::ArrayXd o_t = trace.o.col(t).array();
    const Eigen::ArrayXd g_t = trace.g.col(t).array();
    const Eigen::ArrayXd c_t = trace.cell.col(t).array();
    Eigen::ArrayXd c_prev = Eigen::ArrayXd::Zero(dh);
    Eigen::ArrayXd h_prev_v = Eigen::ArrayXd::Zero(dh);
    if (t > 0) {
      c_prev = trace.cell.col(t - 1).array();
      h_prev_v = trace.h.col(t - 1).array();
    }

    const Eigen::ArrayXd dh_total = upstream.col(t).array() + dh_rec;
    const Eigen::ArrayXd tanh_c = c_t.tanh();
    const Eigen::ArrayXd da_o = dh_total * tanh_c * o_t * (1.0 - o_t);
    Eigen::ArrayXd dc_total = dh_total * o_t * (1.0 - tanh_c.square()) + dc_rec;
    // With the literal cell equation C_t = sigma(s_t), fold in sigma'.
    const Eigen::ArrayXd ds =
        paper_exact_cell ? (dc_total * c_t * (1.0 - c_t)).eval() : dc_total;
    const Eigen::ArrayXd da_f = ds * c_prev * f_t * (1.0 - f_t);
    const Eigen::ArrayXd da_i = ds * g_t * i_t * (1.0 - i_t);
    const Eigen::ArrayXd da_g = ds * i_t * (1.0 - g_t.square());

    dc_rec = ds * f_t;
    dh_rec = (params.W_i * da_i.matrix() + params.W_f * da_f.matrix() +
              params.W_o * da_o.matrix() + params.W_g * da_g.matrix())
                 .array();

    const Eigen::VectorXd xt = x.col(t);
    grads.U_i.noalias() += xt * da_i.matrix().transpose();
    grads.U_f.noalias() += xt * da_f.matrix().transpose();
    grads.U_o.noalias() += xt * da_o.matrix().transpose();
    grads.U_g.noalias() += xt * da_g.matrix().transpose();
    if (t > 0) {
      grads.W_i.noalias() += h_prev_v.matrix() * da_i.matrix().transpose();
      grads.W_f.noalias() += h_prev_v.matrix() * da_f.matrix().transpose();
      grads.W_o.noalias() += h_prev_v.matrix() * da_o.matrix().transpose();
      grads.W_g.noalias() += h_prev_v.matrix() * da_g.matrix().transpose();
    }
    grads.b_i += da_i.matrix();
    grads.b_f += da_f.matrix();
    grads.b_o += da_o.matrix();
    grads.b_c += da_g.matrix();

    if (dx != nullptr) {
      dx->col(t) = params.U_i * da_i.matrix() + params.U_f * da_f.matrix() +
                   params.U_o * da_o.matrix() + params.U_g * da_g.matrix();
    }
  }
}

EncoderOutput bilstm_forward(const Eigen::MatrixXd& x, const LstmParams& fwd,
                             const LstmParams& bwd, bool paper_exact_cell,
                             LstmTrace* trace_fwd, LstmTrace* trace_bwd) {
  const Eigen::Index n = x.cols();
  const EncoderOutput forward = lstm_forward(x, fwd, paper_exact_cell, trace_fwd);
  const Eigen::MatrixXd x_rev = x.rowwise().reverse();
  const EncoderOutput backward = lstm_forward(x_rev, bwd, paper_exact_cell, trace_bwd);
  const Eigen::Index dh = fwd.d_h();
  EncoderOutput out;
  out.points.resize(2 * dh, n);
  out.points.topRows(dh) = forward.points;
  // Backward-pass step k processed original position n-1-k.
  out.points.bottomRows(dh) = backward.points.rowwise().reverse();
  return out;
}

EncoderOutput encode(const EncoderParams& params, const Eigen::MatrixXd& x,
                     const std::string& doc_id, EncodeTrace* trace) {
  EncoderOutput out;
  switch (params.config.kind) {
    case EncoderKind::cnn:
      out = cnn_forward(x, *params.cnn);
      break;
    case EncoderKind::lstm:
      out = lstm_forward(x, *params.lstm_fwd, params.config.paper_exact_cell,
                         trace != nullptr ? &trace->fwd : nullptr);
      break;
    case EncoderKind::bilstm:
      out = bilstm_forward(x, *params.lstm_fwd, *params.lstm_bwd,
                           params.config.paper_exact_cell,
                           trace != nullptr ? &trace->fwd : nullptr,
                           trace != nullptr ? &trace->bwd : nullptr);
      break;
  }
  out.doc_id = doc_id;
  return out;
}

void encode_backward(const EncoderParams& params, const Eigen::MatrixXd& x,
                     const EncodeTrace& trace, const Eigen::MatrixXd& upstream,
                     EncoderParams& grads, Eigen::MatrixXd* dx) {
  switch (params.config.kind) {
    case EncoderKind::cnn:
      cnn_backward(x, *params.cnn, upstream, *grads.cnn, dx);
      break;
    case EncoderKind::lstm:
      lstm_backward(x, *params.lstm_fwd, trace.fwd, upstream,
                    params.config.paper_exact_cell, *grads.lstm_fwd, dx);
      break;
    case EncoderKind::bilstm: {
      const Eigen::Index dh = params.lstm_fwd->d_h();
      lstm_backward(x, *params.lstm_fwd, trace.fwd, upstream.topRows(dh),
                    params.config.paper_exact_cell, *grads.lstm_fwd, dx);
      const Eigen::MatrixXd x_rev = x.rowwise().reverse();
      const Eigen::MatrixXd upstream_rev =
          upstream.bottomRows(dh).rowwise().reverse();
      Eigen::MatrixXd dx_rev;
      lstm_backward(x_rev, *params.lstm_bwd, trace.bwd, upstream_rev,
                    params.config.paper_exact_cell, *grads.lstm_bwd,
                    dx != nullptr ? &dx_rev : nullptr);
      if (dx != nullptr) *dx += dx_rev.rowwise().reverse();
      break;
    }
  }
}

// --- batch normalization ---

BatchNormTrace batch_norm_forward(BatchNormParams& bn,
                                  std::vector<Eigen::MatrixXd*>& points,
                                  const std::vector<double>& multiplicity,
                                  bool update_running) {
  const Eigen::Index d = bn.gamma.size();
  BatchNormTrace trace;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  double total = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    sum += multiplicity[k] * points[k]->rowwise().sum();
    total += multiplicity[k] * static_cast<double>(points[k]->cols());
  }
  if (total <= 0.0) throw InternalError("batch_norm_forward: empty batch");
  trace.mean = sum / total;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (std::size_t k = 0; k < points.size(); ++k) {
    sq += multiplicity[k] *
          (points[k]->colwise() - trace.mean).array().square().matrix().rowwise().sum();
  }
  trace.var = sq / total;
  trace.inv_std = (trace.var.array() + bn.eps).rsqrt();
  trace.count = static_cast<std::size_t>(total);

  for (auto* m : points) {
    Eigen::ArrayXXd scaled = (m->colwise() - trace.mean).array();
    scaled.colwise() *= trace.inv_std.array() * bn.gamma.array();
    scaled.colwise() += bn.beta.array();
    *m = scaled.matrix();
  }
  if (update_running) {
    bn.running_mean = bn.momentum * bn.running_mean + (1.0 - bn.momentum) * trace.mean;
    bn.running_var = bn.momentum * bn.running_var + (1.0 - bn.momentum) * trace.var;
  }
  return trace;
}

void batch_norm_backward(const BatchNormParams& bn, const BatchNormTrace& trace,
                         const std::vector<Eigen::MatrixXd*>& raw,
                         const std::vector<double>& multiplicity,
                         std::vector<Eigen::MatrixXd>& upstream,
                         Eigen::VectorXd& dgamma, Eigen::VectorXd& dbeta) {
  const Eigen::Index d = bn.gamma.size();
  const double total = static_cast<double>(trace.count);
  dgamma = Eigen::VectorXd::Zero(d);
  dbeta = Eigen::VectorXd::Zero(d);

  // Sums over actual loss usages (upstream is already role-summed);
  // multiplicity enters only through the statistics' dependence on each
  // unique tensor.
  Eigen::ArrayXd sum_dxhat = Eigen::ArrayXd::Zero(d);
  Eigen::ArrayXd sum_dxhat_xc = Eigen::ArrayXd::Zero(d);
  std::vector<Eigen::MatrixXd> xhat(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    xhat[k] =
        ((raw[k]->colwise() - trace.mean).array().colwise() * trace.inv_std.array())
            .matrix();
    const Eigen::MatrixXd dxhat =
        (upstream[k].array().colwise() * bn.gamma.array()).matrix();
    dgamma += (upstream[k].array() * xhat[k].array()).matrix().rowwise().sum();
    dbeta += upstream[k].rowwise().sum();
    sum_dxhat += dxhat.rowwise().sum().array();
    sum_dxhat_xc += (dxhat.array() * xhat[k].array()).rowwise().sum();
  }

  // With (x - mean) = xhat / inv_std:
  //   dL/dvar  = -0.5 inv_std^3 sum(dxhat (x - mean)) = -0.5 inv_std^2 sum(dxhat xhat)
  //   dL/dmean = -inv_std sum(dxhat)
  const Eigen::ArrayXd inv_std = trace.inv_std.array();
  const Eigen::ArrayXd dvar = -0.5 * inv_std.square() * sum_dxhat_xc;
  const Eigen::ArrayXd dmean = -inv_std * sum_dxhat;

  for (std::size_t k = 0; k < raw.size(); ++k) {
    const double mk = multiplicity[k];
    const Eigen::ArrayXXd dxhat =
        upstream[k].array().colwise() * bn.gamma.array();
    Eigen::ArrayXXd dxr = dxhat.colwise() * inv_std;
    // d var / d x = 2 mk (x - mean) / total; (x - mean) = xhat / inv_std
    dxr += (xhat[k].array().colwise() * (dvar * (2.0 * mk / total) / inv_std));
    dxr.colwise() += dmean * (mk / total);
    upstream[k] = dxr.matrix();
  }
}

void batch_norm_apply_running(const BatchNormParams& bn, Eigen::MatrixXd& points) {
  const Eigen::ArrayXd inv_std = (bn.running_var.array() + bn.eps).rsqrt();
  Eigen::ArrayXXd scaled = (points.colwise() - bn.running_mean).array();
  scaled.colwise() *= inv_std * bn.gamma.array();
  scaled.colwise() += bn.beta.array();
  points = scaled.matrix();
}

}  // namespace corelw
