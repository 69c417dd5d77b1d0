// SPDX-License-Identifier: Apache-2.0

#include "igpose/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

#include "igpose/binio.hpp"
#include "igpose/config.hpp"
#include "igpose/error.hpp"

namespace igpose::net {

namespace {

template<typename S> S sigmoid(S x) { return S(1) / (S(1) + std::exp(-x)); }

template<typename S>
Mat<S> silu(const Mat<S>& a) {
  return a.unaryExpr([](S x) { return x * sigmoid(x); });
}

template<typename S>
Mat<S> dsilu(const Mat<S>& a) {
  return a.unaryExpr([](S x) {
    S s = sigmoid(x);
    return s * (S(1) + x * (S(1) - s));
  });
}

template<typename S>
Mat<S> sigmoid_m(const Mat<S>& a) {
  return a.unaryExpr([](S x) { return sigmoid(x); });
}

template<typename S>
Mat<S> affine(const Mat<S>& x, const Linear<S>& l) {
  Mat<S> y = x * l.weight;
  if (l.bias.size() > 0)
    y.rowwise() += l.bias.row(0);
  return y;
}

// Accumulates parameter gradients of y = x W + b and returns dL/dx.
template<typename S>
Mat<S> affine_backward(const Mat<S>& x, const Mat<S>& dy, const Linear<S>& l,
                       Linear<S>& g) {
  g.weight.noalias() += x.transpose() * dy;
  if (l.bias.size() > 0)
    g.bias += dy.colwise().sum();
  return dy * l.weight.transpose();
}

template<typename S>
Linear<S> make_linear(int in, int out, bool bias) {
  Linear<S> l;
  l.weight = Mat<S>::Zero(in, out);
  if (bias)
    l.bias = Mat<S>::Zero(1, out);
  return l;
}

template<typename S>
ModelParams<S> skeleton(const ModelConfig& cfg) {
  cfg.validate();
  const int h = cfg.hidden_dim;
  ModelParams<S> p;
  p.cfg = cfg;
  p.input = make_linear<S>(cfg.input_dim, h, true);
  for (int t = 0; t < cfg.layers; ++t) {
    EgnnParams<S> e;
    e.edge1 = make_linear<S>(2 * h + 1 + cfg.edge_dim, h, true);
    e.edge2 = make_linear<S>(h, h, true);
    e.coord1 = make_linear<S>(h, h, true);
    e.coord2 = make_linear<S>(h, 1, false);
    e.node1 = make_linear<S>(2 * h, h, true);
    e.node2 = make_linear<S>(h, h, true);
    p.egnn.push_back(std::move(e));
    GruParams<S> g;
    g.w_ir = g.w_iz = g.w_in = Mat<S>::Zero(2 * h, h);
    g.w_hr = g.w_hz = g.w_hn = Mat<S>::Zero(h, h);
    g.b_r = g.b_z = g.b_n = Mat<S>::Zero(1, h);
    p.gru.push_back(std::move(g));
  }
  p.pool_gate = make_linear<S>(h, 1, true);
  p.cls1 = make_linear<S>(h, h, true);
  p.cls2 = make_linear<S>(h, 2, true);
  p.node_head = make_linear<S>(h, 3, true);
  p.reg_head = make_linear<S>(h, 1, true);
  return p;
}

bool is_bias_name(const std::string& name) {
  auto ends = [&](const char* suffix) {
    std::string s(suffix);
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends(".bias") || ends(".b_r") || ends(".b_z") || ends(".b_n");
}

// Near-zero coordinate steps at init: with full-scale weights the positions
// grow geometrically with depth and the distance inputs saturate every layer
// after the first.
constexpr double kCoordGain = 1e-3;

template<typename S>
void glorot_fill(Mat<S>& w, std::mt19937_64& rng, double gain = 1.0) {
  const double s = gain * std::sqrt(6.0 / double(w.rows() + w.cols()));
  std::uniform_real_distribution<double> u(-s, s);
  for (long r = 0; r < w.rows(); ++r)
    for (long c = 0; c < w.cols(); ++c)
      w(r, c) = static_cast<S>(u(rng));
}

template<typename S>
Mat<S> to_mat(const Eigen::MatrixXd& m) {
  return m.cast<S>();
}

// ---- cached forward pieces ----

template<typename S>
struct EgnnCache {
  Mat<S> e_in, a1, s1, a2, m, diff, b1, t1, c, c_in, c1, u1;
  std::vector<S> deg_inv;
};

template<typename S>
struct GruCache {
  Mat<S> x, h_prev, r, z, n, rh;
};

template<typename S>
struct Trace {
  Mat<S> x, a0;
  std::vector<Mat<S>> h;  // h[0..T]
  std::vector<Mat<S>> p;  // p[0..T]
  std::vector<EgnnCache<S>> egnn;
  std::vector<GruCache<S>> gru;
  DirectedEdges edges;
  Mat<S> edge_feats;
  std::vector<int> pool_set;
  std::vector<S> pool_w;
  RowVec<S> g;
  Mat<S> cls_a1, cls_ud;
  std::vector<double> mask;
};

template<typename S>
EgnnResult<S> egnn_forward(const Mat<S>& h, const Mat<S>& coords, const DirectedEdges& de,
                           const Mat<S>& ef, const EgnnParams<S>& p, int layer,
                           EgnnCache<S>* cache) {
  const long n = h.rows();
  const long hd = h.cols();
  const long ne = static_cast<long>(de.size());
  const long fd = ef.cols();
  if (coords.rows() != n || coords.cols() != 3)
    fail(ErrorKind::dimension, "egnn layer " + std::to_string(layer) + ": coords must be N x 3");
  if (p.edge1.weight.rows() != 2 * hd + 1 + fd)
    fail(ErrorKind::dimension, "egnn layer " + std::to_string(layer) +
                                   ": edge input width mismatch");
  Mat<S> e_in(ne, 2 * hd + 1 + fd);
  Mat<S> diff(ne, 3);
  for (long e = 0; e < ne; ++e) {
    const int i = de.dst[e];
    const int j = de.src[e];
    e_in.row(e).segment(0, hd) = h.row(i);
    e_in.row(e).segment(hd, hd) = h.row(j);
    diff.row(e) = coords.row(i) - coords.row(j);
    e_in(e, 2 * hd) = diff.row(e).squaredNorm();
    e_in.row(e).tail(fd) = ef.row(de.feat_row[e]);
  }
  Mat<S> a1 = affine(e_in, p.edge1);
  Mat<S> s1 = silu(a1);
  Mat<S> a2 = affine(s1, p.edge2);
  Mat<S> m = silu(a2);
  Mat<S> b1 = affine(m, p.coord1);
  Mat<S> t1 = silu(b1);
  Mat<S> c = affine(t1, p.coord2);

  Mat<S> agg = Mat<S>::Zero(n, hd);
  Mat<S> shift = Mat<S>::Zero(n, 3);
  std::vector<S> deg(static_cast<size_t>(n), S(0));
  for (long e = 0; e < ne; ++e) {
    const int i = de.dst[e];
    agg.row(i) += m.row(e);
    shift.row(i) += diff.row(e) * c(e, 0);
    deg[i] += S(1);
  }
  EgnnResult<S> out;
  out.coords = coords;
  std::vector<S> deg_inv(static_cast<size_t>(n), S(0));
  for (long i = 0; i < n; ++i)
    if (deg[i] > 0) {
      deg_inv[i] = S(1) / deg[i];
      out.coords.row(i) += shift.row(i) * deg_inv[i];
    }
  Mat<S> c_in(n, 2 * hd);
  c_in << h, agg;
  Mat<S> c1 = affine(c_in, p.node1);
  Mat<S> u1 = silu(c1);
  out.h_tilde = affine(u1, p.node2);
  if (!out.h_tilde.allFinite() || !out.coords.allFinite())
    fail(ErrorKind::numeric, "egnn layer " + std::to_string(layer) +
                                 " produced non-finite values");
  if (cache) {
    cache->e_in = std::move(e_in);
    cache->a1 = std::move(a1);
    cache->s1 = std::move(s1);
    cache->a2 = std::move(a2);
    cache->m = std::move(m);
    cache->diff = std::move(diff);
    cache->b1 = std::move(b1);
    cache->t1 = std::move(t1);
    cache->c = std::move(c);
    cache->c_in = std::move(c_in);
    cache->c1 = std::move(c1);
    cache->u1 = std::move(u1);
    cache->deg_inv = std::move(deg_inv);
  }
  return out;
}

// Returns (dL/dh, dL/dcoords) and accumulates parameter gradients.
template<typename S>
std::pair<Mat<S>, Mat<S>> egnn_backward(const EgnnCache<S>& k, const DirectedEdges& de,
                                        const Mat<S>& d_ht, const Mat<S>& d_pout,
                                        const EgnnParams<S>& p, EgnnParams<S>& g) {
  const long n = d_ht.rows();
  const long hd = d_ht.cols();
  const long ne = static_cast<long>(de.size());
  Mat<S> dh = Mat<S>::Zero(n, hd);
  Mat<S> dp = d_pout;

  Mat<S> d_u1 = affine_backward(k.u1, d_ht, p.node2, g.node2);
  Mat<S> d_c1 = d_u1.cwiseProduct(dsilu(k.c1));
  Mat<S> d_cin = affine_backward(k.c_in, d_c1, p.node1, g.node1);
  dh += d_cin.leftCols(hd);
  Mat<S> d_agg = d_cin.rightCols(hd);

  Mat<S> d_c(ne, 1);
  Mat<S> d_diff = Mat<S>::Zero(ne, 3);
  for (long e = 0; e < ne; ++e) {
    const int i = de.dst[e];
    const S w = k.deg_inv[i];
    d_c(e, 0) = w * d_pout.row(i).dot(k.diff.row(e));
    d_diff.row(e) = d_pout.row(i) * (w * k.c(e, 0));
  }
  Mat<S> d_t1 = affine_backward(k.t1, d_c, p.coord2, g.coord2);
  Mat<S> d_b1 = d_t1.cwiseProduct(dsilu(k.b1));
  Mat<S> d_m = affine_backward(k.m, d_b1, p.coord1, g.coord1);
  for (long e = 0; e < ne; ++e)
    d_m.row(e) += d_agg.row(de.dst[e]);

  Mat<S> d_a2 = d_m.cwiseProduct(dsilu(k.a2));
  Mat<S> d_s1 = affine_backward(k.s1, d_a2, p.edge2, g.edge2);
  Mat<S> d_a1 = d_s1.cwiseProduct(dsilu(k.a1));
  Mat<S> d_ein = affine_backward(k.e_in, d_a1, p.edge1, g.edge1);
  for (long e = 0; e < ne; ++e) {
    const int i = de.dst[e];
    const int j = de.src[e];
    dh.row(i) += d_ein.row(e).segment(0, hd);
    dh.row(j) += d_ein.row(e).segment(hd, hd);
    d_diff.row(e) += k.diff.row(e) * (S(2) * d_ein(e, 2 * hd));
    dp.row(i) += d_diff.row(e);
    dp.row(j) -= d_diff.row(e);
  }
  return {std::move(dh), std::move(dp)};
}

template<typename S>
Mat<S> gru_forward(const Mat<S>& h_tilde, const Mat<S>& h_prev, const GruParams<S>& p,
                   GruCache<S>* cache) {
  if (h_tilde.rows() != h_prev.rows() || h_tilde.cols() != h_prev.cols() ||
      p.w_ir.rows() != 2 * h_prev.cols())
    fail(ErrorKind::dimension, "gru cell: shape mismatch");
  Mat<S> x(h_tilde.rows(), 2 * h_tilde.cols());
  x << h_tilde, h_prev;
  Mat<S> ar = x * p.w_ir + h_prev * p.w_hr;
  ar.rowwise() += p.b_r.row(0);
  Mat<S> az = x * p.w_iz + h_prev * p.w_hz;
  az.rowwise() += p.b_z.row(0);
  Mat<S> r = sigmoid_m(ar);
  Mat<S> z = sigmoid_m(az);
  Mat<S> rh = r.cwiseProduct(h_prev);
  Mat<S> an = x * p.w_in + rh * p.w_hn;
  an.rowwise() += p.b_n.row(0);
  Mat<S> nn = an.array().tanh().matrix();
  Mat<S> out = (Mat<S>::Ones(z.rows(), z.cols()) - z).cwiseProduct(nn) + z.cwiseProduct(h_prev);
  if (cache) {
    cache->x = std::move(x);
    cache->h_prev = h_prev;
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->n = std::move(nn);
    cache->rh = std::move(rh);
  }
  return out;
}

// Returns (dL/dh_tilde, dL/dh_prev).
template<typename S>
std::pair<Mat<S>, Mat<S>> gru_backward(const GruCache<S>& k, const Mat<S>& d_out,
                                       const GruParams<S>& p, GruParams<S>& g) {
  const long hd = d_out.cols();
  const Mat<S> ones = Mat<S>::Ones(d_out.rows(), hd);
  Mat<S> dn = d_out.cwiseProduct(ones - k.z);
  Mat<S> dz = d_out.cwiseProduct(k.h_prev - k.n);
  Mat<S> dhp = d_out.cwiseProduct(k.z);

  Mat<S> dan = dn.cwiseProduct(ones - k.n.cwiseProduct(k.n));
  g.w_in.noalias() += k.x.transpose() * dan;
  g.w_hn.noalias() += k.rh.transpose() * dan;
  g.b_n += dan.colwise().sum();
  Mat<S> dx = dan * p.w_in.transpose();
  Mat<S> drh = dan * p.w_hn.transpose();
  Mat<S> dr = drh.cwiseProduct(k.h_prev);
  dhp += drh.cwiseProduct(k.r);

  Mat<S> daz = dz.cwiseProduct(k.z).cwiseProduct(ones - k.z);
  g.w_iz.noalias() += k.x.transpose() * daz;
  g.w_hz.noalias() += k.h_prev.transpose() * daz;
  g.b_z += daz.colwise().sum();
  dx.noalias() += daz * p.w_iz.transpose();
  dhp.noalias() += daz * p.w_hz.transpose();

  Mat<S> dar = dr.cwiseProduct(k.r).cwiseProduct(ones - k.r);
  g.w_ir.noalias() += k.x.transpose() * dar;
  g.w_hr.noalias() += k.h_prev.transpose() * dar;
  g.b_r += dar.colwise().sum();
  dx.noalias() += dar * p.w_ir.transpose();
  dhp.noalias() += dar * p.w_hr.transpose();

  Mat<S> d_ht = dx.leftCols(hd);
  dhp += dx.rightCols(hd);
  return {std::move(d_ht), std::move(dhp)};
}

template<typename S>
ForwardOutput<S> forward_impl(const ResidueGraph& gr, const ModelParams<S>& p, Mode mode,
                              std::uint64_t dropout_seed, Trace<S>* trace) {
  const ModelConfig& cfg = p.cfg;
  if (gr.node_feats.cols() != cfg.input_dim)
    fail(ErrorKind::dimension, "graph '" + gr.id + "': node feature width " +
                                   std::to_string(gr.node_feats.cols()) + " != model input " +
                                   std::to_string(cfg.input_dim));
  if (gr.edge_feats.cols() != cfg.edge_dim && !gr.edges.empty())
    fail(ErrorKind::dimension, "graph '" + gr.id + "': edge feature width " +
                                   std::to_string(gr.edge_feats.cols()) + " != model edge dim " +
                                   std::to_string(cfg.edge_dim));
  Trace<S> local;
  Trace<S>& tr = trace ? *trace : local;
  tr.x = to_mat<S>(gr.node_feats);
  tr.edges = directed_edges(gr);
  tr.edge_feats = gr.edges.empty() ? Mat<S>(0, cfg.edge_dim) : to_mat<S>(gr.edge_feats);
  tr.a0 = affine(tr.x, p.input);
  tr.h.assign(1, silu(tr.a0));
  tr.p.assign(1, to_mat<S>(gr.coords));
  tr.egnn.resize(cfg.layers);
  tr.gru.resize(cfg.layers);
  for (int t = 0; t < cfg.layers; ++t) {
    EgnnResult<S> e = egnn_forward(tr.h[t], tr.p[t], tr.edges, tr.edge_feats, p.egnn[t], t,
                                   trace ? &tr.egnn[t] : nullptr);
    tr.h.push_back(gru_forward(e.h_tilde, tr.h[t], p.gru[t], trace ? &tr.gru[t] : nullptr));
    tr.p.push_back(std::move(e.coords));
  }
  const Mat<S>& hT = tr.h.back();

  ForwardOutput<S> out;
  out.pool_set = select_pool_set(gr, cfg.pooling);
  PoolResult<S> pool = weighted_pool(hT, out.pool_set, p.pool_gate);
  out.pooled = pool.pooled;
  out.pool_weights = pool.weights;
  tr.pool_set = out.pool_set;
  tr.pool_w = pool.weights;
  tr.g = pool.pooled;

  tr.mask = dropout_mask(cfg.hidden_dim, cfg.dropout, mode, dropout_seed);
  Mat<S> gm = pool.pooled;
  tr.cls_a1 = affine(gm, p.cls1);
  Mat<S> u = silu(tr.cls_a1);
  for (long c = 0; c < u.cols(); ++c)
    u(0, c) *= static_cast<S>(tr.mask[c]);
  tr.cls_ud = u;
  Mat<S> logits = affine(u, p.cls2);
  const S mx = std::max(logits(0, 0), logits(0, 1));
  const S e0 = std::exp(logits(0, 0) - mx);
  const S e1 = std::exp(logits(0, 1) - mx);
  out.class_logits = {logits(0, 0), logits(0, 1)};
  out.class_probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
  out.reg_z = affine(gm, p.reg_head)(0, 0);
  out.reg_score = scaled_tanh(out.reg_z);
  out.node_logits = node_type_head(hT, p);
  out.coords_final = tr.p.back();
  if (!std::isfinite(out.class_probs[1]) || !std::isfinite(out.reg_score))
    fail(ErrorKind::numeric, "graph '" + gr.id + "': non-finite head output");
  return out;
}

template<typename S>
void backward(const Trace<S>& tr, const ForwardOutput<S>& out, const OutputGrad& og,
              const ModelParams<S>& p, ModelParams<S>& g) {
  const ModelConfig& cfg = p.cfg;
  const Mat<S>& hT = tr.h.back();
  const long n = hT.rows();
  const long hd = hT.cols();
  Mat<S> dh = Mat<S>::Zero(n, hd);

  if (og.d_node_logits.size() > 0) {
    if (og.d_node_logits.rows() != n || og.d_node_logits.cols() != 3)
      fail(ErrorKind::dimension, "node logit gradient shape mismatch");
    Mat<S> dl = og.d_node_logits.cast<S>();
    dh += affine_backward(hT, dl, p.node_head, g.node_head);
  }

  Mat<S> gm = tr.g;
  Mat<S> dg = Mat<S>::Zero(1, hd);
  if (og.d_class_logits[0] != 0 || og.d_class_logits[1] != 0) {
    Mat<S> dlog(1, 2);
    dlog << static_cast<S>(og.d_class_logits[0]), static_cast<S>(og.d_class_logits[1]);
    Mat<S> d_ud = affine_backward(tr.cls_ud, dlog, p.cls2, g.cls2);
    for (long c = 0; c < d_ud.cols(); ++c)
      d_ud(0, c) *= static_cast<S>(tr.mask[c]);
    Mat<S> d_a1 = d_ud.cwiseProduct(dsilu(tr.cls_a1));
    dg += affine_backward(gm, d_a1, p.cls1, g.cls1);
  }
  if (og.d_reg_score != 0) {
    const S th = std::tanh(S(0.5) * out.reg_z);
    Mat<S> dz(1, 1);
    dz(0, 0) = static_cast<S>(og.d_reg_score) * S(0.25) * (S(1) - th * th);
    dg += affine_backward(gm, dz, p.reg_head, g.reg_head);
  }

  // weighted pool
  const Mat<S>& wp = p.pool_gate.weight;  // h x 1
  for (int i : tr.pool_set) {
    const S w = tr.pool_w[i];
    const S dw = dg.row(0).dot(hT.row(i));
    const S ds = dw * w * (S(1) - w);
    dh.row(i) += dg.row(0) * w;
    dh.row(i) += wp.col(0).transpose() * ds;
    g.pool_gate.weight.col(0) += hT.row(i).transpose() * ds;
    g.pool_gate.bias(0, 0) += ds;
  }

  Mat<S> dp = Mat<S>::Zero(n, 3);
  for (int t = cfg.layers - 1; t >= 0; --t) {
    auto [d_ht, d_hprev] = gru_backward(tr.gru[t], dh, p.gru[t], g.gru[t]);
    auto [dh_e, dp_e] = egnn_backward(tr.egnn[t], tr.edges, d_ht, dp, p.egnn[t], g.egnn[t]);
    dh = d_hprev + dh_e;
    dp = std::move(dp_e);
  }
  Mat<S> d_a0 = dh.cwiseProduct(dsilu(tr.a0));
  g.input.weight.noalias() += tr.x.transpose() * d_a0;
  g.input.bias += d_a0.colwise().sum();
}

} // namespace

const char* to_string(PoolingStrategy p) {
  switch (p) {
    case PoolingStrategy::all: return "all";
    case PoolingStrategy::interface_only: return "interface_only";
    case PoolingStrategy::cdr_only: return "cdr_only";
    case PoolingStrategy::cdr_epitope_only: return "cdr_epitope_only";
    case PoolingStrategy::no_interface: return "no_interface";
    case PoolingStrategy::no_cdr: return "no_cdr";
    case PoolingStrategy::no_cdr_epitope: return "no_cdr_epitope";
  }
  return "?";
}

const std::vector<PoolingStrategy>& all_pooling_strategies() {
  static const std::vector<PoolingStrategy> v = {
      PoolingStrategy::all,          PoolingStrategy::interface_only,
      PoolingStrategy::cdr_only,     PoolingStrategy::cdr_epitope_only,
      PoolingStrategy::no_interface, PoolingStrategy::no_cdr,
      PoolingStrategy::no_cdr_epitope};
  return v;
}

PoolingStrategy parse_pooling(std::string_view s) {
  for (PoolingStrategy p : all_pooling_strategies())
    if (s == to_string(p))
      return p;
  fail(ErrorKind::config, "unknown pooling strategy '" + std::string(s) + "'");
}

const char* to_string(HeadMode m) {
  return m == HeadMode::classifier ? "classifier" : "regressor";
}

HeadMode parse_head_mode(std::string_view s) {
  if (s == "classifier")
    return HeadMode::classifier;
  if (s == "regressor")
    return HeadMode::regressor;
  fail(ErrorKind::config, "unknown head mode '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (hidden_dim < 1)
    fail(ErrorKind::config, "model requires hidden_dim >= 1");
  if (layers < 1)
    fail(ErrorKind::config, "model requires layers >= 1");
  if (!(dropout >= 0 && dropout < 1))
    fail(ErrorKind::config, "model requires dropout in [0, 1)");
  if (input_dim < 1 || edge_dim < 1)
    fail(ErrorKind::config, "model requires positive input and edge dims");
}

template<typename S>
ModelParams<S> ModelParams<S>::zeros_like() const {
  ModelParams<S> z = *this;
  z.visit([](const std::string&, Mat<S>& t) { t.setZero(); });
  return z;
}

template<typename S>
size_t ModelParams<S>::parameter_count() const {
  size_t n = 0;
  visit([&](const std::string&, const Mat<S>& t) { n += static_cast<size_t>(t.size()); });
  return n;
}

template<typename S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<S> p = skeleton<S>(cfg);
  std::mt19937_64 rng(seed);
  p.visit([&](const std::string& name, Mat<S>& t) {
    if (is_bias_name(name))
      t.setZero();
    else if (name.ends_with("coord2.weight"))
      glorot_fill(t, rng, kCoordGain);
    else
      glorot_fill(t, rng);
  });
  return p;
}

template<typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out = skeleton<To>(p.cfg);
  std::vector<const Mat<From>*> src;
  p.visit([&](const std::string&, const Mat<From>& t) { src.push_back(&t); });
  size_t k = 0;
  out.visit([&](const std::string&, Mat<To>& t) { t = src[k++]->template cast<To>(); });
  return out;
}

template<typename S>
void reset_regressor_head(ModelParams<S>& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  glorot_fill(p.reg_head.weight, rng);
  p.reg_head.bias.setZero();
}

template<typename S>
Mat<S> input_embed(const Mat<S>& x, const Linear<S>& input) {
  if (x.cols() != input.weight.rows())
    fail(ErrorKind::dimension, "input_embed: feature width " + std::to_string(x.cols()) +
                                   " != " + std::to_string(input.weight.rows()));
  return silu(affine(x, input));
}

DirectedEdges directed_edges(const ResidueGraph& g) {
  DirectedEdges d;
  d.dst.reserve(2 * g.edges.size());
  d.src.reserve(2 * g.edges.size());
  d.feat_row.reserve(2 * g.edges.size());
  for (size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    d.dst.push_back(e.i);
    d.src.push_back(e.j);
    d.feat_row.push_back(static_cast<int>(k));
    d.dst.push_back(e.j);
    d.src.push_back(e.i);
    d.feat_row.push_back(static_cast<int>(k));
  }
  return d;
}

template<typename S>
EgnnResult<S> egnn_layer(const Mat<S>& h, const Mat<S>& coords, const DirectedEdges& edges,
                         const Mat<S>& edge_feats, const EgnnParams<S>& p, int layer_index) {
  return egnn_forward(h, coords, edges, edge_feats, p, layer_index, static_cast<EgnnCache<S>*>(nullptr));
}

template<typename S>
Mat<S> modified_gru_cell(const Mat<S>& h_tilde, const Mat<S>& h_prev, const GruParams<S>& p) {
  return gru_forward(h_tilde, h_prev, p, static_cast<GruCache<S>*>(nullptr));
}

template<typename S>
Mat<S> standard_gru_cell(const Mat<S>& h_tilde, const Mat<S>& h_prev, const GruParams<S>& p) {
  const long hd = h_prev.cols();
  Mat<S> ar = h_tilde * p.w_ir.topRows(hd) + h_prev * p.w_hr;
  ar.rowwise() += p.b_r.row(0);
  Mat<S> az = h_tilde * p.w_iz.topRows(hd) + h_prev * p.w_hz;
  az.rowwise() += p.b_z.row(0);
  Mat<S> r = sigmoid_m(ar);
  Mat<S> z = sigmoid_m(az);
  Mat<S> an = h_tilde * p.w_in.topRows(hd) + r.cwiseProduct(h_prev) * p.w_hn;
  an.rowwise() += p.b_n.row(0);
  Mat<S> nn = an.array().tanh().matrix();
  return (Mat<S>::Ones(z.rows(), z.cols()) - z).cwiseProduct(nn) + z.cwiseProduct(h_prev);
}

template<typename S>
PoolResult<S> weighted_pool(const Mat<S>& h, const std::vector<int>& nodes,
                            const Linear<S>& gate) {
  if (nodes.empty())
    fail(ErrorKind::empty_set, "weighted_pool: empty pooling set");
  Mat<S> s = affine(h, gate);
  PoolResult<S> out;
  out.weights.resize(static_cast<size_t>(h.rows()));
  for (long i = 0; i < h.rows(); ++i)
    out.weights[i] = sigmoid(s(i, 0));
  out.pooled = RowVec<S>::Zero(h.cols());
  for (int i : nodes) {
    if (i < 0 || i >= h.rows())
      fail(ErrorKind::validation, "weighted_pool: node index out of range");
    out.pooled += h.row(i) * out.weights[i];
  }
  return out;
}

std::vector<int> select_pool_set(const ResidueGraph& g, PoolingStrategy strategy) {
  const int n = g.node_count();
  std::vector<char> base(static_cast<size_t>(n), 0);
  bool complement = false;
  switch (strategy) {
    case PoolingStrategy::all:
      std::fill(base.begin(), base.end(), 1);
      break;
    case PoolingStrategy::no_interface:
      complement = true;
      [[fallthrough]];
    case PoolingStrategy::interface_only:
      for (int v : g.interface_set)
        base[v] = 1;
      break;
    case PoolingStrategy::no_cdr:
      complement = true;
      [[fallthrough]];
    case PoolingStrategy::cdr_only:
      for (int v = 0; v < n; ++v)
        base[v] = g.cdr_mask[v] ? 1 : 0;
      break;
    case PoolingStrategy::no_cdr_epitope:
      complement = true;
      [[fallthrough]];
    case PoolingStrategy::cdr_epitope_only:
      for (const auto& e : g.edges) {
        if (e.kind != featurize::EdgeKind::inter)
          continue;
        const int ig = structio::is_ig(g.node_role[e.i]) ? e.i : e.j;
        if (g.cdr_mask[ig]) {
          base[e.i] = 1;
          base[e.j] = 1;
        }
      }
      break;
  }
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if ((base[v] != 0) != complement)
      out.push_back(v);
  if (out.empty())
    fail(ErrorKind::empty_set, "graph '" + g.id + "': pooling set for " +
                                   to_string(strategy) + " is empty");
  return out;
}

std::vector<double> dropout_mask(int width, double p, Mode mode, std::uint64_t seed) {
  std::vector<double> mask(static_cast<size_t>(width), 1.0);
  if (mode == Mode::infer || p <= 0)
    return mask;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& m : mask)
    m = u(rng) < p ? 0.0 : 1.0 / (1.0 - p);
  return mask;
}

template<typename S>
ClassifierResult<S> classifier_head(const RowVec<S>& g, const ModelParams<S>& p,
                                    const std::vector<double>& mask) {
  Mat<S> gm = g;
  Mat<S> u = silu(affine(gm, p.cls1));
  if (static_cast<long>(mask.size()) != u.cols())
    fail(ErrorKind::dimension, "classifier_head: dropout mask width mismatch");
  for (long c = 0; c < u.cols(); ++c)
    u(0, c) *= static_cast<S>(mask[c]);
  Mat<S> logits = affine(u, p.cls2);
  const S mx = std::max(logits(0, 0), logits(0, 1));
  const S e0 = std::exp(logits(0, 0) - mx);
  const S e1 = std::exp(logits(0, 1) - mx);
  return {{logits(0, 0), logits(0, 1)}, {e0 / (e0 + e1), e1 / (e0 + e1)}};
}

template<typename S>
S regressor_head(const RowVec<S>& g, const ModelParams<S>& p) {
  Mat<S> gm = g;
  return scaled_tanh(affine(gm, p.reg_head)(0, 0));
}

template<typename S>
Mat<S> node_type_head(const Mat<S>& h, const ModelParams<S>& p) {
  return affine(h, p.node_head);
}

template<typename S>
ForwardOutput<S> forward(const ResidueGraph& g, const ModelParams<S>& p, Mode mode,
                         std::uint64_t dropout_seed) {
  return forward_impl(g, p, mode, dropout_seed, static_cast<Trace<S>*>(nullptr));
}

double ensemble_combine(std::span<const double> values, std::span<const double> weights) {
  if (values.empty())
    fail(ErrorKind::config, "ensemble_combine: no values");
  if (values.size() != weights.size())
    fail(ErrorKind::dimension, "ensemble_combine: " + std::to_string(values.size()) +
                                   " values but " + std::to_string(weights.size()) +
                                   " weights");
  double sum = 0;
  for (double w : weights) {
    if (!(w >= 0))
      fail(ErrorKind::config, "ensemble_combine: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    fail(ErrorKind::config, "ensemble_combine: weights sum to " + std::to_string(sum));
  double out = 0;
  for (size_t m = 0; m < values.size(); ++m)
    out += weights[m] * values[m];
  return out;
}

template<typename S>
GradientResult<S> gradients(const ModelParams<S>& p, std::span<const ResidueGraph* const> batch,
                            const Objective<S>& objective, Mode mode,
                            std::span<const std::uint64_t> dropout_seeds) {
  if (!dropout_seeds.empty() && dropout_seeds.size() != batch.size())
    fail(ErrorKind::dimension, "gradients: one dropout seed per graph required");
  std::vector<Trace<S>> traces(batch.size());
  GradientResult<S> res;
  res.outputs.reserve(batch.size());
  for (size_t b = 0; b < batch.size(); ++b)
    res.outputs.push_back(forward_impl(*batch[b], p, mode,
                                       dropout_seeds.empty() ? 0 : dropout_seeds[b],
                                       &traces[b]));
  ObjectiveValue ov = objective(res.outputs);
  if (ov.grads.size() != batch.size())
    fail(ErrorKind::dimension, "gradients: objective returned wrong gradient count");
  res.loss = ov.loss;
  res.grads = p.zeros_like();
  for (size_t b = 0; b < batch.size(); ++b)
    backward(traces[b], res.outputs[b], ov.grads[b], p, res.grads);
  res.grads.visit([](const std::string& name, const Mat<S>& t) {
    if (!t.allFinite())
      fail(ErrorKind::numeric, "non-finite gradient in " + name);
  });
  return res;
}

void save_checkpoint(const ModelParams<float>& p, std::uint64_t seed, const std::string& path) {
  nlohmann::json h;
  h["format"] = "igpose-checkpoint";
  h["version"] = 1;
  h["dtype"] = "f32";
  h["layout"] = "row-major";
  h["config"] = p.cfg;
  h["seed"] = seed;
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  p.visit([&](const std::string& name, const Mat<float>& t) {
    manifest.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()},
                        {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(float);
  });
  h["params"] = manifest;
  h["blob_bytes"] = offset;
  std::ofstream out(path, std::ios::binary);
  if (!out)
    fail(ErrorKind::io, "cannot write checkpoint " + path);
  out << h.dump() << '\n';
  p.visit([&](const std::string&, const Mat<float>& t) {
    for (long r = 0; r < t.rows(); ++r)
      for (long c = 0; c < t.cols(); ++c)
        binio::write_le<float>(out, t(r, c));
  });
  if (!out)
    fail(ErrorKind::io, "failed writing checkpoint " + path);
}

ModelParams<float> load_checkpoint(const std::string& path, std::uint64_t* seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorKind::io, "cannot open checkpoint " + path);
  std::string line;
  std::getline(in, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "checkpoint " + path + ": bad header: " + e.what());
  }
  if (h.value("format", "") != "igpose-checkpoint" || h.value("version", 0) != 1 ||
      h.value("dtype", "") != "f32")
    fail(ErrorKind::parse, "checkpoint " + path + ": unsupported format");
  ModelConfig cfg = h.at("config").get<ModelConfig>();
  ModelParams<float> p = skeleton<float>(cfg);
  const auto& manifest = h.at("params");
  size_t k = 0;
  p.visit([&](const std::string& name, Mat<float>& t) {
    if (k >= manifest.size())
      fail(ErrorKind::dimension, "checkpoint " + path + ": missing tensor " + name);
    const auto& m = manifest[k++];
    if (m.at("name").get<std::string>() != name || m.at("rows").get<long>() != t.rows() ||
        m.at("cols").get<long>() != t.cols())
      fail(ErrorKind::dimension, "checkpoint " + path + ": tensor " +
                                     m.at("name").get<std::string>() +
                                     " does not match model shape for " + name);
  });
  if (k != manifest.size())
    fail(ErrorKind::dimension, "checkpoint " + path + ": unexpected extra tensors");
  p.visit([&](const std::string& name, Mat<float>& t) {
    for (long r = 0; r < t.rows(); ++r)
      for (long c = 0; c < t.cols(); ++c)
        t(r, c) = binio::read_le<float>(in, "checkpoint tensor " + name);
  });
  if (seed)
    *seed = h.value("seed", std::uint64_t{0});
  return p;
}

ModelParams<float> load_checkpoint(const std::string& path, const ModelConfig& expected,
                                   std::uint64_t* seed) {
  ModelParams<float> p = load_checkpoint(path, seed);
  const ModelConfig& c = p.cfg;
  if (c.hidden_dim != expected.hidden_dim || c.layers != expected.layers ||
      c.input_dim != expected.input_dim || c.edge_dim != expected.edge_dim)
    fail(ErrorKind::config, "checkpoint " + path + " architecture (h=" +
                                std::to_string(c.hidden_dim) + ", T=" +
                                std::to_string(c.layers) + ") does not match model config (h=" +
                                std::to_string(expected.hidden_dim) + ", T=" +
                                std::to_string(expected.layers) + ")");
  return p;
}

#define IGPOSE_INSTANTIATE(S)                                                                 \
  template struct ModelParams<S>;                                                             \
  template ModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                  \
  template void reset_regressor_head<S>(ModelParams<S>&, std::uint64_t);                      \
  template Mat<S> input_embed<S>(const Mat<S>&, const Linear<S>&);                            \
  template EgnnResult<S> egnn_layer<S>(const Mat<S>&, const Mat<S>&, const DirectedEdges&,    \
                                       const Mat<S>&, const EgnnParams<S>&, int);             \
  template Mat<S> modified_gru_cell<S>(const Mat<S>&, const Mat<S>&, const GruParams<S>&);    \
  template Mat<S> standard_gru_cell<S>(const Mat<S>&, const Mat<S>&, const GruParams<S>&);    \
  template PoolResult<S> weighted_pool<S>(const Mat<S>&, const std::vector<int>&,             \
                                          const Linear<S>&);                                  \
  template ClassifierResult<S> classifier_head<S>(const RowVec<S>&, const ModelParams<S>&,    \
                                                  const std::vector<double>&);                \
  template S regressor_head<S>(const RowVec<S>&, const ModelParams<S>&);                      \
  template Mat<S> node_type_head<S>(const Mat<S>&, const ModelParams<S>&);                    \
  template ForwardOutput<S> forward<S>(const ResidueGraph&, const ModelParams<S>&, Mode,      \
                                       std::uint64_t);                                        \
  template GradientResult<S> gradients<S>(const ModelParams<S>&,                              \
                                          std::span<const ResidueGraph* const>,               \
                                          const Objective<S>&, Mode,                          \
                                          std::span<const std::uint64_t>);

IGPOSE_INSTANTIATE(float)
IGPOSE_INSTANTIATE(double)
#undef IGPOSE_INSTANTIATE

template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

} // namespace igpose::net
