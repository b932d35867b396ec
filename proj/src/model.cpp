// Copyright 2026 The spanmask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spanmask/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "spanmask/rng.hpp"

namespace spanmask {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLnEps = 1e-5;       // layer-norm variance floor
constexpr double kLogitClamp = 30.0;  // loss-side logit clamp
constexpr double kInitStd = 0.02;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double clamp_logit(double z) {
  return std::min(kLogitClamp, std::max(-kLogitClamp, z));
}

// Cross entropy from raw logits with the loss-side clamp. Returns the loss
// and writes d(loss)/d(logit) into grad (zero where the clamp saturates).
double cross_entropy(const VectorXd& logits, int target, VectorXd* grad) {
  const int k = static_cast<int>(logits.size());
  VectorXd zc(k);
  for (int i = 0; i < k; ++i) zc[i] = clamp_logit(logits[i]);
  const double zmax = zc.maxCoeff();
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += std::exp(zc[i] - zmax);
  const double lse = zmax + std::log(sum);
  if (grad) {
    grad->resize(k);
    for (int i = 0; i < k; ++i) {
      double p = std::exp(zc[i] - lse);
      double g = p - (i == target ? 1.0 : 0.0);
      (*grad)[i] = std::fabs(logits[i]) < kLogitClamp ? g : 0.0;
    }
  }
  return lse - zc[target];
}

// Binary cross entropy on a single clamped logit.
double binary_cross_entropy(double logit, bool positive, double* grad) {
  const double z = clamp_logit(logit);
  const double y = positive ? 1.0 : 0.0;
  const double loss = std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::fabs(z)));
  if (grad) {
    double sigma = 1.0 / (1.0 + std::exp(-z));
    *grad = std::fabs(logit) < kLogitClamp ? sigma - y : 0.0;
  }
  return loss;
}

bool dropout_keep(const DropoutContext& ctx, std::uint64_t site, int row,
                  int col) {
  return !rng::bernoulli_at(ctx.key, site,
                            static_cast<std::uint64_t>(row),
                            static_cast<std::uint64_t>(col), ctx.rate);
}

}  // namespace

// --- config -----------------------------------------------------------------

void EncoderConfig::check() const {
  if (layers < 1) throw std::invalid_argument("encoder needs >= 1 layer");
  if (heads < 1 || hidden_dim % heads != 0) {
    throw std::invalid_argument("hidden_dim must be divisible by heads");
  }
  if (vocab_size < 5) throw std::invalid_argument("vocab_size not set");
  if (max_seq_len < 2) throw std::invalid_argument("max_seq_len too small");
  if (max_span_width < 1) throw std::invalid_argument("max_span_width must be >= 1");
  if (size_embedding_dim < 1) throw std::invalid_argument("size_embedding_dim must be >= 1");
  if (num_labels < 2) throw std::invalid_argument("num_labels must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("dropout must lie in [0, 1)");
  }
}

EncoderConfig EncoderConfig::desk_scale(int vocab_size) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  return c;
}

EncoderConfig EncoderConfig::full_scale(int vocab_size) {
  EncoderConfig c;
  c.layers = 12;
  c.heads = 12;
  c.hidden_dim = 768;
  c.ffn_dim = 3072;
  c.max_seq_len = 512;
  c.size_embedding_dim = 25;
  c.vocab_size = vocab_size;
  return c;
}

// --- tensor store -----------------------------------------------------------

int TensorStore::add(std::string name, int rows, int cols) {
  TensorInfo info;
  info.name = std::move(name);
  info.offset = total_;
  info.rows = rows;
  info.cols = cols;
  total_ += static_cast<std::size_t>(rows) * cols;
  tensors_.push_back(std::move(info));
  return static_cast<int>(tensors_.size()) - 1;
}

TensorStore::Map TensorStore::t(int handle) {
  const auto& info = tensors_[handle];
  return Map(data_.data() + info.offset, info.rows, info.cols);
}

TensorStore::ConstMap TensorStore::t(int handle) const {
  const auto& info = tensors_[handle];
  return ConstMap(data_.data() + info.offset, info.rows, info.cols);
}

TensorStore TensorStore::zeros_like() const {
  TensorStore out;
  out.tensors_ = tensors_;
  out.total_ = total_;
  out.allocate();
  return out;
}

void TensorStore::accumulate(const TensorStore& other) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

// --- params -----------------------------------------------------------------

namespace {

ParamLayout build_layout(const EncoderConfig& c, TensorStore* store) {
  ParamLayout l;
  l.token_embedding = store->add("token_embedding", c.vocab_size, c.hidden_dim);
  l.position_embedding =
      store->add("position_embedding", c.max_seq_len, c.hidden_dim);
  for (int i = 0; i < c.layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    LayerHandles h;
    h.wq = store->add(p + "wq", c.hidden_dim, c.hidden_dim);
    h.bq = store->add(p + "bq", 1, c.hidden_dim);
    h.wk = store->add(p + "wk", c.hidden_dim, c.hidden_dim);
    h.bk = store->add(p + "bk", 1, c.hidden_dim);
    h.wv = store->add(p + "wv", c.hidden_dim, c.hidden_dim);
    h.bv = store->add(p + "bv", 1, c.hidden_dim);
    h.wo = store->add(p + "wo", c.hidden_dim, c.hidden_dim);
    h.bo = store->add(p + "bo", 1, c.hidden_dim);
    h.ln1_gamma = store->add(p + "ln1_gamma", 1, c.hidden_dim);
    h.ln1_beta = store->add(p + "ln1_beta", 1, c.hidden_dim);
    h.w1 = store->add(p + "w1", c.hidden_dim, c.ffn_dim);
    h.b1 = store->add(p + "b1", 1, c.ffn_dim);
    h.w2 = store->add(p + "w2", c.ffn_dim, c.hidden_dim);
    h.b2 = store->add(p + "b2", 1, c.hidden_dim);
    h.ln2_gamma = store->add(p + "ln2_gamma", 1, c.hidden_dim);
    h.ln2_beta = store->add(p + "ln2_beta", 1, c.hidden_dim);
    l.layers.push_back(h);
  }
  l.size_embedding =
      store->add("size_embedding", c.max_span_width, c.size_embedding_dim);
  l.entity_w = store->add("entity_w", c.span_repr_dim(), c.num_labels);
  l.entity_b = store->add("entity_b", 1, c.num_labels);
  l.relation_w = store->add("relation_w", c.pair_repr_dim(), 1);
  l.relation_b = store->add("relation_b", 1, 1);
  l.lm_w = store->add("lm_w", c.hidden_dim, c.vocab_size);
  l.lm_b = store->add("lm_b", 1, c.vocab_size);
  return l;
}

}  // namespace

ModelParams ModelParams::zeros(const EncoderConfig& config) {
  config.check();
  ModelParams p;
  p.config = config;
  p.layout = build_layout(config, &p.store);
  p.store.allocate();
  return p;
}

ModelParams ModelParams::init(const EncoderConfig& config, std::uint64_t seed) {
  ModelParams p = zeros(config);
  rng::Stream stream(rng::combine(seed, rng::fnv1a("model-init")));
  for (double& x : p.store.data()) x = kInitStd * stream.next_gaussian();
  // Biases zero, layer norms identity.
  for (const auto& h : p.layout.layers) {
    for (int handle : {h.bq, h.bk, h.bv, h.bo, h.b1, h.b2, h.ln1_beta, h.ln2_beta}) {
      p.store.t(handle).setZero();
    }
    p.store.t(h.ln1_gamma).setOnes();
    p.store.t(h.ln2_gamma).setOnes();
  }
  p.store.t(p.layout.entity_b).setZero();
  p.store.t(p.layout.relation_b).setZero();
  p.store.t(p.layout.lm_b).setZero();
  return p;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'P', 'M', 'K', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint file");
  return v;
}

}  // namespace

void ModelParams::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(out, kCheckpointVersion);
  for (int v : {config.layers, config.heads, config.hidden_dim, config.ffn_dim,
                config.max_seq_len, config.vocab_size, config.max_span_width,
                config.size_embedding_dim, config.num_labels}) {
    write_pod(out, static_cast<std::int32_t>(v));
  }
  write_pod(out, config.dropout);
  write_pod(out, static_cast<std::uint32_t>(config.layer_norm ? 1 : 0));
  write_pod(out, static_cast<std::uint64_t>(store.size()));
  out.write(reinterpret_cast<const char*>(store.data().data()),
            static_cast<std::streamsize>(store.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  if (read_pod<std::uint32_t>(in) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path);
  }
  EncoderConfig c;
  c.layers = read_pod<std::int32_t>(in);
  c.heads = read_pod<std::int32_t>(in);
  c.hidden_dim = read_pod<std::int32_t>(in);
  c.ffn_dim = read_pod<std::int32_t>(in);
  c.max_seq_len = read_pod<std::int32_t>(in);
  c.vocab_size = read_pod<std::int32_t>(in);
  c.max_span_width = read_pod<std::int32_t>(in);
  c.size_embedding_dim = read_pod<std::int32_t>(in);
  c.num_labels = read_pod<std::int32_t>(in);
  c.dropout = read_pod<double>(in);
  c.layer_norm = read_pod<std::uint32_t>(in) != 0;
  ModelParams p = ModelParams::zeros(c);
  const std::uint64_t n = read_pod<std::uint64_t>(in);
  if (n != p.store.size()) {
    throw std::runtime_error("checkpoint parameter count mismatch in " + path);
  }
  in.read(reinterpret_cast<char*>(p.store.data().data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint file: " + path);
  return p;
}

std::uint64_t params_hash(const ModelParams& params) {
  const auto& d = params.store.data();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(d.data());
  for (std::size_t i = 0; i < d.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// --- encoder ----------------------------------------------------------------

namespace {

struct LayerCache {
  MatrixXd input;
  MatrixXd q, k, v;
  std::vector<MatrixXd> attn;  // per-head softmax probabilities
  MatrixXd heads_concat;
  MatrixXd attn_drop_mask;  // empty when dropout inactive
  MatrixXd res1;
  MatrixXd ln1_xhat;
  VectorXd ln1_rstd;
  MatrixXd x1;
  MatrixXd ffn_pre;
  MatrixXd ffn_act;
  MatrixXd ffn_drop_mask;
  MatrixXd res2;
  MatrixXd ln2_xhat;
  VectorXd ln2_rstd;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  MatrixXd hidden;
};

void layer_norm_forward(const MatrixXd& x, const Eigen::RowVectorXd& gamma,
                        const Eigen::RowVectorXd& beta, MatrixXd* y,
                        MatrixXd* xhat, VectorXd* rstd) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  y->resize(n, d);
  xhat->resize(n, d);
  rstd->resize(n);
  for (int i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double r = 1.0 / std::sqrt(var + kLnEps);
    (*rstd)[i] = r;
    xhat->row(i) = (x.row(i).array() - mu) * r;
    y->row(i) = xhat->row(i).cwiseProduct(gamma) + beta;
  }
}

// dx for y = gamma * xhat + beta; accumulates dgamma/dbeta.
MatrixXd layer_norm_backward(const MatrixXd& dy, const MatrixXd& xhat,
                             const VectorXd& rstd,
                             const Eigen::RowVectorXd& gamma,
                             TensorStore* grads, int gamma_h, int beta_h) {
  const int n = static_cast<int>(dy.rows());
  const int d = static_cast<int>(dy.cols());
  MatrixXd dx(n, d);
  Eigen::RowVectorXd dgamma = Eigen::RowVectorXd::Zero(d);
  Eigen::RowVectorXd dbeta = Eigen::RowVectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    dgamma += dy.row(i).cwiseProduct(xhat.row(i));
    dbeta += dy.row(i);
    Eigen::RowVectorXd dyhat = dy.row(i).cwiseProduct(gamma);
    const double m1 = dyhat.mean();
    const double m2 = dyhat.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) =
        rstd[i] * (dyhat.array() - m1 - xhat.row(i).array() * m2).matrix();
  }
  grads->t(gamma_h) += dgamma;
  grads->t(beta_h) += dbeta;
  return dx;
}

MatrixXd dropout_mask(const DropoutContext& ctx, std::uint64_t site, int n,
                      int d) {
  MatrixXd m(n, d);
  const double scale = 1.0 / (1.0 - ctx.rate);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      m(i, j) = dropout_keep(ctx, site, i, j) ? scale : 0.0;
    }
  }
  return m;
}

MatrixXd encode_forward(const ModelParams& params, const std::vector<int>& ids,
                        const DropoutContext& dropout, ForwardCache* cache) {
  const auto& c = params.config;
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw std::invalid_argument("cannot encode an empty sequence");
  if (n > c.max_seq_len) {
    throw std::invalid_argument("sequence of length " + std::to_string(n) +
                                " exceeds max_seq_len " +
                                std::to_string(c.max_seq_len));
  }
  const auto& store = params.store;
  const auto tok = store.t(params.layout.token_embedding);
  const auto pos = store.t(params.layout.position_embedding);

  MatrixXd x(n, c.hidden_dim);
  for (int i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= c.vocab_size) {
      throw std::invalid_argument("token id " + std::to_string(ids[i]) +
                                  " outside vocabulary");
    }
    x.row(i) = tok.row(ids[i]) + pos.row(i);
  }

  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (cache) cache->layers.resize(c.layers);

  for (int l = 0; l < c.layers; ++l) {
    const auto& h = params.layout.layers[l];
    LayerCache local;
    LayerCache& lc = cache ? cache->layers[l] : local;
    lc.input = x;

    lc.q = (x * store.t(h.wq)).rowwise() + Eigen::RowVectorXd(store.t(h.bq));
    lc.k = (x * store.t(h.wk)).rowwise() + Eigen::RowVectorXd(store.t(h.bk));
    lc.v = (x * store.t(h.wv)).rowwise() + Eigen::RowVectorXd(store.t(h.bv));

    lc.attn.resize(c.heads);
    lc.heads_concat.resize(n, c.hidden_dim);
    for (int head = 0; head < c.heads; ++head) {
      auto qh = lc.q.middleCols(head * dh, dh);
      auto kh = lc.k.middleCols(head * dh, dh);
      auto vh = lc.v.middleCols(head * dh, dh);
      MatrixXd scores = qh * kh.transpose() * scale;
      MatrixXd& probs = lc.attn[head];
      probs.resize(n, n);
      for (int i = 0; i < n; ++i) {
        const double m = scores.row(i).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(i).array() - m).exp().matrix();
        probs.row(i) = e / e.sum();
      }
      lc.heads_concat.middleCols(head * dh, dh) = probs * vh;
    }

    MatrixXd o = (lc.heads_concat * store.t(h.wo)).rowwise() +
                 Eigen::RowVectorXd(store.t(h.bo));
    if (dropout.active) {
      lc.attn_drop_mask = dropout_mask(dropout, 2 * l, n, c.hidden_dim);
      o = o.cwiseProduct(lc.attn_drop_mask);
    }
    lc.res1 = lc.input + o;
    if (c.layer_norm) {
      layer_norm_forward(lc.res1, store.t(h.ln1_gamma), store.t(h.ln1_beta),
                         &lc.x1, &lc.ln1_xhat, &lc.ln1_rstd);
    } else {
      lc.x1 = lc.res1;
    }

    lc.ffn_pre = (lc.x1 * store.t(h.w1)).rowwise() +
                 Eigen::RowVectorXd(store.t(h.b1));
    lc.ffn_act = lc.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    MatrixXd f2 = (lc.ffn_act * store.t(h.w2)).rowwise() +
                  Eigen::RowVectorXd(store.t(h.b2));
    if (dropout.active) {
      lc.ffn_drop_mask = dropout_mask(dropout, 2 * l + 1, n, c.hidden_dim);
      f2 = f2.cwiseProduct(lc.ffn_drop_mask);
    }
    lc.res2 = lc.x1 + f2;
    if (c.layer_norm) {
      layer_norm_forward(lc.res2, store.t(h.ln2_gamma), store.t(h.ln2_beta),
                         &x, &lc.ln2_xhat, &lc.ln2_rstd);
    } else {
      x = lc.res2;
    }
  }
  if (cache) cache->hidden = x;
  return x;
}

// Backpropagates dhidden through the encoder, accumulating parameter
// gradients; returns nothing (input embeddings are leaves).
void encode_backward(const ModelParams& params, const std::vector<int>& ids,
                     const DropoutContext& dropout, const ForwardCache& cache,
                     MatrixXd dx, TensorStore* grads) {
  const auto& c = params.config;
  const auto& store = params.store;
  const int n = static_cast<int>(ids.size());
  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (int l = c.layers - 1; l >= 0; --l) {
    const auto& h = params.layout.layers[l];
    const LayerCache& lc = cache.layers[l];

    MatrixXd dres2;
    if (c.layer_norm) {
      dres2 = layer_norm_backward(dx, lc.ln2_xhat, lc.ln2_rstd,
                                  store.t(h.ln2_gamma), grads, h.ln2_gamma,
                                  h.ln2_beta);
    } else {
      dres2 = dx;
    }

    MatrixXd dx1 = dres2;
    MatrixXd df2 = dres2;
    if (dropout.active) df2 = df2.cwiseProduct(lc.ffn_drop_mask);

    grads->t(h.w2) += lc.ffn_act.transpose() * df2;
    grads->t(h.b2) += df2.colwise().sum();
    MatrixXd dact = df2 * store.t(h.w2).transpose();
    MatrixXd dpre =
        dact.cwiseProduct(lc.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }));
    grads->t(h.w1) += lc.x1.transpose() * dpre;
    grads->t(h.b1) += dpre.colwise().sum();
    dx1 += dpre * store.t(h.w1).transpose();

    MatrixXd dres1;
    if (c.layer_norm) {
      dres1 = layer_norm_backward(dx1, lc.ln1_xhat, lc.ln1_rstd,
                                  store.t(h.ln1_gamma), grads, h.ln1_gamma,
                                  h.ln1_beta);
    } else {
      dres1 = dx1;
    }

    MatrixXd dinput = dres1;
    MatrixXd do_ = dres1;
    if (dropout.active) do_ = do_.cwiseProduct(lc.attn_drop_mask);

    grads->t(h.wo) += lc.heads_concat.transpose() * do_;
    grads->t(h.bo) += do_.colwise().sum();
    MatrixXd dconcat = do_ * store.t(h.wo).transpose();

    MatrixXd dq = MatrixXd::Zero(n, c.hidden_dim);
    MatrixXd dk = MatrixXd::Zero(n, c.hidden_dim);
    MatrixXd dv = MatrixXd::Zero(n, c.hidden_dim);
    for (int head = 0; head < c.heads; ++head) {
      auto qh = lc.q.middleCols(head * dh, dh);
      auto kh = lc.k.middleCols(head * dh, dh);
      auto vh = lc.v.middleCols(head * dh, dh);
      const MatrixXd& probs = lc.attn[head];
      MatrixXd dch = dconcat.middleCols(head * dh, dh);

      MatrixXd dprobs = dch * vh.transpose();
      dv.middleCols(head * dh, dh) = probs.transpose() * dch;

      MatrixXd dscores(n, n);
      for (int i = 0; i < n; ++i) {
        const double dot = dprobs.row(i).dot(probs.row(i));
        dscores.row(i) = probs.row(i).cwiseProduct(
            (dprobs.row(i).array() - dot).matrix());
      }
      dscores *= scale;
      dq.middleCols(head * dh, dh) = dscores * kh;
      dk.middleCols(head * dh, dh) = dscores.transpose() * qh;
    }

    grads->t(h.wq) += lc.input.transpose() * dq;
    grads->t(h.bq) += dq.colwise().sum();
    grads->t(h.wk) += lc.input.transpose() * dk;
    grads->t(h.bk) += dk.colwise().sum();
    grads->t(h.wv) += lc.input.transpose() * dv;
    grads->t(h.bv) += dv.colwise().sum();

    dinput += dq * store.t(h.wq).transpose() + dk * store.t(h.wk).transpose() +
              dv * store.t(h.wv).transpose();
    dx = std::move(dinput);
  }

  auto dtok = grads->t(params.layout.token_embedding);
  auto dpos = grads->t(params.layout.position_embedding);
  for (int i = 0; i < n; ++i) {
    dtok.row(ids[i]) += dx.row(i);
    dpos.row(i) += dx.row(i);
  }
}

}  // namespace

Encoded encode(const ModelParams& params, const std::vector<int>& ids) {
  Encoded out;
  out.hidden = encode_forward(params, ids, DropoutContext{}, nullptr);
  out.context = out.hidden.row(0).transpose();
  return out;
}

// --- span / pair representations --------------------------------------------

namespace {

// Max-pool of hidden rows [span.start+1, span.end+1); argmax rows per
// dimension recorded for backprop.
VectorXd span_pool(const MatrixXd& hidden, const TokenSpan& span,
                   std::vector<int>* argmax) {
  const int d = static_cast<int>(hidden.cols());
  const int lo = span.start + 1;
  const int hi = span.end + 1;
  if (lo < 1 || hi > hidden.rows() || lo >= hi) {
    throw std::invalid_argument("span outside encoded sentence");
  }
  VectorXd out(d);
  if (argmax) argmax->assign(d, lo);
  for (int j = 0; j < d; ++j) {
    double best = hidden(lo, j);
    int best_row = lo;
    for (int i = lo + 1; i < hi; ++i) {
      if (hidden(i, j) > best) {
        best = hidden(i, j);
        best_row = i;
      }
    }
    out[j] = best;
    if (argmax) (*argmax)[j] = best_row;
  }
  return out;
}

// Max-pool of the rows strictly between two spans; zero when adjacent or
// overlapping. Returns whether a gap exists.
bool between_pool(const MatrixXd& hidden, const TokenSpan& a,
                  const TokenSpan& b, VectorXd* out,
                  std::vector<int>* argmax) {
  const int d = static_cast<int>(hidden.cols());
  const int gap_start = std::min(a.end, b.end);
  const int gap_end = std::max(a.start, b.start);
  if (gap_start >= gap_end) {
    out->setZero(d);
    if (argmax) argmax->clear();
    return false;
  }
  *out = span_pool(hidden, {gap_start, gap_end}, argmax);
  return true;
}

struct SpanReprCache {
  VectorXd repr;
  std::vector<int> pool_argmax;
  int size_index = 0;
};

SpanReprCache make_span_repr(const ModelParams& params, const MatrixXd& hidden,
                             const TokenSpan& span) {
  const auto& c = params.config;
  SpanReprCache out;
  VectorXd pooled = span_pool(hidden, span, &out.pool_argmax);
  out.size_index = std::min(span.width(), c.max_span_width) - 1;
  out.repr.resize(c.span_repr_dim());
  out.repr.head(c.hidden_dim) = pooled;
  out.repr.segment(c.hidden_dim, c.hidden_dim) = hidden.row(0).transpose();
  out.repr.tail(c.size_embedding_dim) =
      params.store.t(params.layout.size_embedding)
          .row(out.size_index)
          .transpose();
  return out;
}

// Scatter a span-representation gradient back to hidden rows / size table.
void span_repr_backward(const ModelParams& params, const SpanReprCache& cache,
                        const VectorXd& drepr, MatrixXd* dhidden,
                        TensorStore* grads) {
  const auto& c = params.config;
  for (int j = 0; j < c.hidden_dim; ++j) {
    (*dhidden)(cache.pool_argmax[j], j) += drepr[j];
  }
  dhidden->row(0) += drepr.segment(c.hidden_dim, c.hidden_dim).transpose();
  grads->t(params.layout.size_embedding).row(cache.size_index) +=
      drepr.tail(c.size_embedding_dim).transpose();
}

}  // namespace

Eigen::VectorXd span_representation(const ModelParams& params,
                                    const Eigen::MatrixXd& hidden,
                                    const TokenSpan& span) {
  return make_span_repr(params, hidden, span).repr;
}

Eigen::VectorXd pair_representation(const ModelParams& params,
                                    const Eigen::MatrixXd& hidden,
                                    const TokenSpan& trigger,
                                    const TokenSpan& argument) {
  const auto& c = params.config;
  VectorXd out(c.pair_repr_dim());
  out.head(c.span_repr_dim()) = span_representation(params, hidden, trigger);
  out.segment(c.span_repr_dim(), c.span_repr_dim()) =
      span_representation(params, hidden, argument);
  VectorXd between;
  between_pool(hidden, trigger, argument, &between, nullptr);
  out.tail(c.hidden_dim) = between;
  return out;
}

Eigen::VectorXd classify_entity(const ModelParams& params,
                                const Eigen::VectorXd& span_repr) {
  VectorXd logits = params.store.t(params.layout.entity_w).transpose() * span_repr +
                    params.store.t(params.layout.entity_b).transpose();
  for (int i = 0; i < logits.size(); ++i) logits[i] = clamp_logit(logits[i]);
  const double m = logits.maxCoeff();
  VectorXd probs = (logits.array() - m).exp();
  return probs / probs.sum();
}

double classify_relation(const ModelParams& params,
                         const Eigen::VectorXd& pair_repr) {
  const double z = clamp_logit(
      (params.store.t(params.layout.relation_w).transpose() * pair_repr)(0) +
      params.store.t(params.layout.relation_b)(0, 0));
  return 1.0 / (1.0 + std::exp(-z));
}

// --- losses -----------------------------------------------------------------

namespace {

struct HeadWork {
  // Everything needed to backprop one sentence's heads.
  ForwardCache encoder;
  std::vector<SpanReprCache> span_reprs;
};

JointLossBreakdown sentence_joint_loss(const ModelParams& params,
                                       const SentenceInstance& inst,
                                       const DropoutContext& dropout,
                                       TensorStore* grads) {
  const auto& c = params.config;
  const auto& store = params.store;
  JointLossBreakdown out;

  ForwardCache cache;
  const MatrixXd hidden =
      encode_forward(params, inst.ids, dropout, grads ? &cache : nullptr);
  MatrixXd dhidden = MatrixXd::Zero(hidden.rows(), hidden.cols());

  const auto ent_w = store.t(params.layout.entity_w);
  const auto ent_b = store.t(params.layout.entity_b);
  for (const auto& sample : inst.spans) {
    SpanReprCache repr = make_span_repr(params, hidden, sample.span);
    VectorXd logits = ent_w.transpose() * repr.repr + ent_b.transpose();
    VectorXd dlogits;
    out.entity += cross_entropy(logits, sample.label, grads ? &dlogits : nullptr);
    if (grads) {
      grads->t(params.layout.entity_w) += repr.repr * dlogits.transpose();
      grads->t(params.layout.entity_b) += dlogits.transpose();
      VectorXd drepr = ent_w * dlogits;
      span_repr_backward(params, repr, drepr, &dhidden, grads);
    }
  }

  const auto rel_w = store.t(params.layout.relation_w);
  for (const auto& sample : inst.pairs) {
    SpanReprCache trig = make_span_repr(params, hidden, sample.trigger);
    SpanReprCache arg = make_span_repr(params, hidden, sample.argument);
    VectorXd between;
    std::vector<int> between_argmax;
    const bool has_gap = between_pool(hidden, sample.trigger, sample.argument,
                                      &between, grads ? &between_argmax : nullptr);

    VectorXd pair(c.pair_repr_dim());
    pair.head(c.span_repr_dim()) = trig.repr;
    pair.segment(c.span_repr_dim(), c.span_repr_dim()) = arg.repr;
    pair.tail(c.hidden_dim) = between;

    const double logit =
        (rel_w.transpose() * pair)(0) + store.t(params.layout.relation_b)(0, 0);
    double dlogit = 0.0;
    out.relation +=
        binary_cross_entropy(logit, sample.linked, grads ? &dlogit : nullptr);
    if (grads) {
      grads->t(params.layout.relation_w) += dlogit * pair;
      grads->t(params.layout.relation_b)(0, 0) += dlogit;
      VectorXd dpair = dlogit * VectorXd(rel_w.col(0));
      span_repr_backward(params, trig, dpair.head(c.span_repr_dim()), &dhidden,
                         grads);
      span_repr_backward(params, arg,
                         dpair.segment(c.span_repr_dim(), c.span_repr_dim()),
                         &dhidden, grads);
      if (has_gap) {
        VectorXd dbetween = dpair.tail(c.hidden_dim);
        for (int j = 0; j < c.hidden_dim; ++j) {
          dhidden(between_argmax[j], j) += dbetween[j];
        }
      }
    }
  }

  if (grads) {
    encode_backward(params, inst.ids, dropout, cache, std::move(dhidden), grads);
  }
  return out;
}

double sentence_mlm_loss(const ModelParams& params, const MlmInstance& inst,
                         const DropoutContext& dropout, TensorStore* grads) {
  const auto& store = params.store;
  double loss = 0.0;

  ForwardCache cache;
  const MatrixXd hidden =
      encode_forward(params, inst.ids, dropout, grads ? &cache : nullptr);
  MatrixXd dhidden = MatrixXd::Zero(hidden.rows(), hidden.cols());

  const auto lm_w = store.t(params.layout.lm_w);
  const auto lm_b = store.t(params.layout.lm_b);
  for (std::size_t i = 0; i < inst.masked_positions.size(); ++i) {
    const int pos = inst.masked_positions[i];
    const int target = inst.original_ids[i];
    VectorXd h = hidden.row(pos).transpose();
    VectorXd logits = lm_w.transpose() * h + lm_b.transpose();
    VectorXd dlogits;
    loss += cross_entropy(logits, target, grads ? &dlogits : nullptr);
    if (grads) {
      grads->t(params.layout.lm_w) += h * dlogits.transpose();
      grads->t(params.layout.lm_b) += dlogits.transpose();
      dhidden.row(pos) += (lm_w * dlogits).transpose();
    }
  }

  if (grads && !inst.masked_positions.empty()) {
    encode_backward(params, inst.ids, dropout, cache, std::move(dhidden), grads);
  }
  return loss;
}

}  // namespace

JointLossBreakdown joint_loss(const ModelParams& params,
                              const std::vector<SentenceInstance>& batch) {
  JointLossBreakdown total;
  for (const auto& inst : batch) {
    auto part = sentence_joint_loss(params, inst, DropoutContext{}, nullptr);
    total.entity += part.entity;
    total.relation += part.relation;
  }
  return total;
}

double mlm_loss(const ModelParams& params,
                const std::vector<MlmInstance>& batch) {
  double total = 0.0;
  for (const auto& inst : batch) {
    total += sentence_mlm_loss(params, inst, DropoutContext{}, nullptr);
  }
  return total;
}

JointLossBreakdown joint_loss_backward(const ModelParams& params,
                                       const SentenceInstance& instance,
                                       const DropoutContext& dropout,
                                       TensorStore* grads) {
  return sentence_joint_loss(params, instance, dropout, grads);
}

double mlm_loss_backward(const ModelParams& params, const MlmInstance& instance,
                         const DropoutContext& dropout, TensorStore* grads) {
  return sentence_mlm_loss(params, instance, dropout, grads);
}

// --- negative sampling ------------------------------------------------------

NegativeSamples sample_negatives(int sentence_length,
                                 const MergedAnnotation& gold, int n_entities,
                                 int n_relations, int max_span_width,
                                 std::uint64_t seed) {
  NegativeSamples out;

  std::set<TokenSpan> gold_spans;
  for (const auto& e : gold.entities) gold_spans.insert(e.span);
  std::vector<TokenSpan> span_pool;
  for (const auto& cand : enumerate_spans(sentence_length, max_span_width)) {
    if (!gold_spans.count(cand.span)) span_pool.push_back(cand.span);
  }

  std::set<std::pair<int, int>> gold_pairs;  // entity-index pairs
  std::map<int, int> index_of;
  for (std::size_t i = 0; i < gold.entities.size(); ++i) {
    index_of[gold.entities[i].id] = static_cast<int>(i);
  }
  for (const auto& r : gold.relations) {
    gold_pairs.emplace(index_of.at(r.head), index_of.at(r.tail));
  }
  std::vector<std::pair<int, int>> pair_pool;
  for (std::size_t t = 0; t < gold.entities.size(); ++t) {
    if (!is_trigger_label(gold.entities[t].label)) continue;
    for (std::size_t a = 0; a < gold.entities.size(); ++a) {
      if (t == a || is_trigger_label(gold.entities[a].label)) continue;
      auto key = std::make_pair(static_cast<int>(t), static_cast<int>(a));
      if (!gold_pairs.count(key)) pair_pool.push_back(key);
    }
  }

  // Partial Fisher-Yates with the shared deterministic stream.
  auto take = [](auto& pool, int want, rng::Stream& stream) {
    const int k = std::min<int>(want, static_cast<int>(pool.size()));
    for (int i = 0; i < k; ++i) {
      const std::uint64_t j =
          i + stream.next_below(static_cast<std::uint64_t>(pool.size()) - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
  };

  rng::Stream span_stream(rng::combine(seed, rng::fnv1a("neg-spans")));
  take(span_pool, n_entities, span_stream);
  out.spans = std::move(span_pool);

  rng::Stream pair_stream(rng::combine(seed, rng::fnv1a("neg-pairs")));
  take(pair_pool, n_relations, pair_stream);
  out.pairs = std::move(pair_pool);
  return out;
}

// --- optimizer ---------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::size_t n, double lr, int warmup_steps,
                             double beta1, double beta2, double eps)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      warmup_steps_(warmup_steps),
      m_(n, 0.0),
      v_(n, 0.0) {}

void AdamOptimizer::step(std::vector<double>& params,
                         const std::vector<double>& grads) {
  ++t_;
  const double lr = warmup_steps_ > 0 && t_ <= warmup_steps_
                        ? lr_ * t_ / warmup_steps_
                        : lr_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
  }
}

// --- parallel helpers --------------------------------------------------------

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

int env_threads() {
  const char* v = std::getenv("SPANMASK_THREADS");
  if (!v) return 1;
  int n = std::atoi(v);
  return n < 1 ? 1 : n;
}

// --- training ----------------------------------------------------------------

namespace {

struct SentencePrep {
  std::uint64_t uid = 0;
  int doc_index = 0;
  int sent_index = 0;
  MergedAnnotation merged;
  std::vector<SpanSample> gold_spans;
  std::vector<PairSample> gold_pairs;
};

std::vector<SentencePrep> prepare_sentences(const Corpus& corpus) {
  std::vector<SentencePrep> preps;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    const auto& doc = corpus.documents[d];
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      const auto& sent = doc.sentences[s];
      if (!sent.gold) continue;
      SentencePrep prep;
      prep.uid = sentence_uid(doc, static_cast<int>(s));
      prep.doc_index = static_cast<int>(d);
      prep.sent_index = static_cast<int>(s);
      prep.merged =
          merge_annotation(sent.gold->entities, sent.gold->relations);
      std::map<int, const MergedEntity*> by_id;
      for (const auto& e : prep.merged.entities) {
        by_id[e.id] = &e;
        prep.gold_spans.push_back({e.span, e.label});
      }
      for (const auto& r : prep.merged.relations) {
        prep.gold_pairs.push_back(
            {by_id.at(r.head)->span, by_id.at(r.tail)->span, true});
      }
      preps.push_back(std::move(prep));
    }
  }
  return preps;
}

std::vector<int> sentence_ids(const Sentence& sent, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(sent.tokens.size() + 1);
  ids.push_back(vocab.cls_id());
  for (const auto& tok : sent.tokens) {
    ids.push_back(tok.vocab_id >= 0 ? tok.vocab_id : vocab.id_of(tok.surface));
  }
  return ids;
}

SentenceInstance make_instance(const SentencePrep& prep, const Corpus& corpus,
                               const Vocab& vocab, const EncoderConfig& enc,
                               const TrainConfig& cfg, int epoch) {
  const auto& sent =
      corpus.documents[prep.doc_index].sentences[prep.sent_index];
  SentenceInstance inst;
  inst.uid = prep.uid;
  inst.ids = sentence_ids(sent, vocab);
  inst.spans = prep.gold_spans;
  inst.pairs = prep.gold_pairs;

  const auto negatives = sample_negatives(
      static_cast<int>(sent.tokens.size()), prep.merged, cfg.negative_spans,
      cfg.negative_pairs, enc.max_span_width,
      rng::combine(cfg.seed, rng::fnv1a("negatives"),
                   static_cast<std::uint64_t>(epoch), prep.uid));
  for (const auto& span : negatives.spans) {
    inst.spans.push_back({span, kLabelNegative});
  }
  for (const auto& [t, a] : negatives.pairs) {
    inst.pairs.push_back({prep.merged.entities[t].span,
                          prep.merged.entities[a].span, false});
  }
  return inst;
}

}  // namespace

std::vector<SentenceInstance> build_instances(const Corpus& corpus,
                                              const Vocab& vocab,
                                              const EncoderConfig& enc,
                                              const TrainConfig& cfg,
                                              int epoch) {
  std::vector<SentenceInstance> out;
  for (const auto& prep : prepare_sentences(corpus)) {
    out.push_back(make_instance(prep, corpus, vocab, enc, cfg, epoch));
  }
  return out;
}

TrainResult train(const Corpus& corpus, const Vocab& vocab,
                  const EncoderConfig& encoder_config, const TrainConfig& cfg,
                  const PhraseList* phrases, const ModelParams* initial) {
  encoder_config.check();
  ModelParams params = initial
                           ? *initial
                           : ModelParams::init(encoder_config, cfg.seed);
  const auto preps = prepare_sentences(corpus);
  if (preps.empty()) {
    throw std::runtime_error("training corpus has no annotated sentences");
  }

  AdamOptimizer adam(params.store.size(), cfg.learning_rate,
                     cfg.warmup_steps);
  std::vector<EpochMetrics> metrics;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Re-masked view of the corpus for this epoch; labels never move.
    const Corpus* epoch_corpus = &corpus;
    Corpus masked;
    if (phrases != nullptr) {
      masked = apply_dynamic_mask(corpus, *phrases, vocab, cfg.mask_rate,
                                  epoch, cfg.seed)
                   .first;
      epoch_corpus = &masked;
    }

    std::vector<SentenceInstance> instances;
    instances.reserve(preps.size());
    for (const auto& prep : preps) {
      instances.push_back(
          make_instance(prep, *epoch_corpus, vocab, encoder_config, cfg, epoch));
    }

    // Deterministic epoch shuffle.
    rng::Stream shuffle(rng::combine(cfg.seed, rng::fnv1a("shuffle"),
                                     static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::uint64_t j = i + shuffle.next_below(order.size() - i);
      std::swap(order[i], order[j]);
    }

    EpochMetrics em;
    em.epoch = epoch;
    TensorStore grads = params.store.zeros_like();
    std::vector<TensorStore> worker_grads;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const int batch_n =
          static_cast<int>(std::min<std::size_t>(cfg.batch_size,
                                                 order.size() - b));
      worker_grads.assign(batch_n, params.store.zeros_like());
      std::vector<JointLossBreakdown> losses(batch_n);
      parallel_for(batch_n, cfg.threads, [&](int i) {
        const auto& inst = instances[order[b + i]];
        DropoutContext dropout;
        dropout.active = encoder_config.dropout > 0.0;
        dropout.rate = encoder_config.dropout;
        dropout.key = rng::combine(cfg.seed, rng::fnv1a("dropout"),
                                   static_cast<std::uint64_t>(epoch), inst.uid);
        losses[i] =
            sentence_joint_loss(params, inst, dropout, &worker_grads[i]);
      });
      grads.set_zero();
      for (int i = 0; i < batch_n; ++i) {
        grads.accumulate(worker_grads[i]);
        em.entity_loss += losses[i].entity;
        em.relation_loss += losses[i].relation;
      }
      adam.step(params.store.data(), grads.data());
    }
    em.entity_loss /= static_cast<double>(instances.size());
    em.relation_loss /= static_cast<double>(instances.size());
    if (!std::isfinite(em.entity_loss) || !std::isfinite(em.relation_loss)) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << ": entity_loss="
         << em.entity_loss << " relation_loss=" << em.relation_loss;
      throw std::runtime_error(os.str());
    }
    metrics.push_back(em);
  }
  return {std::move(params), std::move(metrics)};
}

// --- pretraining --------------------------------------------------------------

std::vector<std::vector<int>> chunk_tokens(const std::vector<int>& ids,
                                           int chunk_len) {
  if (chunk_len < 1) throw std::invalid_argument("chunk_len must be >= 1");
  std::vector<std::vector<int>> chunks;
  for (std::size_t i = 0; i < ids.size(); i += chunk_len) {
    chunks.emplace_back(ids.begin() + i,
                        ids.begin() + std::min(ids.size(), i + chunk_len));
  }
  return chunks;
}

PretrainResult pretrain_adaptive(const Corpus& unlabeled, const Vocab& vocab,
                                 const EncoderConfig& encoder_config,
                                 const PretrainConfig& cfg) {
  encoder_config.check();
  if (unlabeled.documents.empty()) {
    throw std::runtime_error("pretraining corpus is empty");
  }
  if (cfg.chunk_len + 2 > encoder_config.max_seq_len) {
    throw std::invalid_argument(
        "chunk_len + 2 prefix tokens exceed max_seq_len");
  }

  // Chunked sequences: [CLS] [DOM=domain] tokens...
  struct Chunk {
    std::vector<int> ids;
    std::uint64_t uid;
  };
  std::vector<Chunk> chunks;
  for (const auto& doc : unlabeled.documents) {
    std::vector<int> ids;
    for (const auto& sent : doc.sentences) {
      for (const auto& tok : sent.tokens) {
        ids.push_back(tok.vocab_id >= 0 ? tok.vocab_id
                                        : vocab.id_of(tok.surface));
      }
    }
    const int dom = vocab.domain_indicator_id(doc.domain);
    int seq = 0;
    for (auto& body : chunk_tokens(ids, cfg.chunk_len)) {
      Chunk c;
      c.ids.reserve(body.size() + 2);
      c.ids.push_back(vocab.cls_id());
      c.ids.push_back(dom);
      c.ids.insert(c.ids.end(), body.begin(), body.end());
      c.uid = rng::combine(rng::fnv1a(doc.id), rng::fnv1a("chunk"),
                           static_cast<std::uint64_t>(seq++));
      chunks.push_back(std::move(c));
    }
  }
  if (chunks.empty()) throw std::runtime_error("pretraining corpus has no tokens");

  ModelParams params = ModelParams::init(encoder_config, cfg.seed);
  AdamOptimizer adam(params.store.size(), cfg.learning_rate);
  std::vector<PretrainEpochMetrics> metrics;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fresh masks every epoch, keyed by (seed, epoch, chunk uid).
    std::vector<MlmInstance> instances;
    instances.reserve(chunks.size());
    for (const auto& chunk : chunks) {
      auto masked = mlm_mask(chunk.ids, vocab, cfg.mlm_rate,
                             rng::combine(cfg.seed, rng::fnv1a("mlm"),
                                          static_cast<std::uint64_t>(epoch),
                                          chunk.uid));
      MlmInstance inst;
      inst.ids = std::move(masked.ids);
      inst.masked_positions = std::move(masked.masked_positions);
      inst.original_ids = std::move(masked.original_ids);
      inst.uid = chunk.uid;
      instances.push_back(std::move(inst));
    }

    rng::Stream shuffle(rng::combine(cfg.seed, rng::fnv1a("pretrain-shuffle"),
                                     static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::uint64_t j = i + shuffle.next_below(order.size() - i);
      std::swap(order[i], order[j]);
    }

    PretrainEpochMetrics em;
    em.epoch = epoch;
    double loss_sum = 0.0;
    long long masked_total = 0;

    TensorStore grads = params.store.zeros_like();
    grads.set_zero();
    int accumulated = 0;
    std::vector<TensorStore> worker_grads;
    for (std::size_t b = 0; b < order.size(); b += cfg.sub_batch_size) {
      const int batch_n = static_cast<int>(
          std::min<std::size_t>(cfg.sub_batch_size, order.size() - b));
      worker_grads.assign(batch_n, params.store.zeros_like());
      std::vector<double> losses(batch_n, 0.0);
      parallel_for(batch_n, cfg.threads, [&](int i) {
        const auto& inst = instances[order[b + i]];
        DropoutContext dropout;
        dropout.active = encoder_config.dropout > 0.0;
        dropout.rate = encoder_config.dropout;
        dropout.key = rng::combine(cfg.seed, rng::fnv1a("pretrain-dropout"),
                                   static_cast<std::uint64_t>(epoch), inst.uid);
        losses[i] = sentence_mlm_loss(params, inst, dropout, &worker_grads[i]);
      });
      for (int i = 0; i < batch_n; ++i) {
        grads.accumulate(worker_grads[i]);
        loss_sum += losses[i];
        masked_total +=
            static_cast<long long>(instances[order[b + i]].masked_positions.size());
      }
      if (++accumulated == cfg.accumulation_steps) {
        adam.step(params.store.data(), grads.data());
        grads.set_zero();
        accumulated = 0;
      }
    }
    if (accumulated > 0) adam.step(params.store.data(), grads.data());

    em.masked_positions = masked_total;
    em.mlm_loss = masked_total > 0 ? loss_sum / masked_total : 0.0;
    if (!std::isfinite(em.mlm_loss)) {
      throw std::runtime_error("pretraining diverged at epoch " +
                               std::to_string(epoch));
    }
    metrics.push_back(em);
  }
  return {std::move(params), std::move(metrics)};
}

// --- gradient checking ---------------------------------------------------------

namespace {

// `loss` evaluates the batch loss; with a non-null TensorStore it also
// accumulates analytic gradients.
GradCheckResult gradient_check_impl(
    const ModelParams& params,
    const std::function<double(const ModelParams&, TensorStore*)>& loss,
    double epsilon, int n_params, std::uint64_t seed) {
  ModelParams work = params;
  TensorStore grads = work.store.zeros_like();
  loss(work, &grads);

  rng::Stream pick(rng::combine(seed, rng::fnv1a("grad-check")));
  GradCheckResult result;
  const std::size_t total = work.store.size();
  for (int i = 0; i < n_params; ++i) {
    const std::size_t idx = pick.next_below(total);
    const double saved = work.store.data()[idx];
    work.store.data()[idx] = saved + epsilon;
    const double up = loss(work, nullptr);
    work.store.data()[idx] = saved - epsilon;
    const double down = loss(work, nullptr);
    work.store.data()[idx] = saved;

    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = grads.data()[idx];
    const double rel = std::fabs(analytic - numeric) /
                       std::max(std::fabs(analytic) + std::fabs(numeric), 1e-4);
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  }
  return result;
}

}  // namespace

GradCheckResult gradient_check_joint(const ModelParams& params,
                                     const std::vector<SentenceInstance>& batch,
                                     double epsilon, int n_params,
                                     std::uint64_t seed) {
  auto loss = [&batch](const ModelParams& p, TensorStore* grads) {
    double total = 0.0;
    for (const auto& inst : batch) {
      total += sentence_joint_loss(p, inst, DropoutContext{}, grads).joint();
    }
    return total;
  };
  return gradient_check_impl(params, loss, epsilon, n_params, seed);
}

GradCheckResult gradient_check_mlm(const ModelParams& params,
                                   const std::vector<MlmInstance>& batch,
                                   double epsilon, int n_params,
                                   std::uint64_t seed) {
  auto loss = [&batch](const ModelParams& p, TensorStore* grads) {
    double total = 0.0;
    for (const auto& inst : batch) {
      total += sentence_mlm_loss(p, inst, DropoutContext{}, grads);
    }
    return total;
  };
  return gradient_check_impl(params, loss, epsilon, n_params, seed);
}

// --- metrics CSV ----------------------------------------------------------------

void write_train_metrics_csv(const std::string& path,
                             const std::vector<EpochMetrics>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out << "epoch,entity_loss,relation_loss,joint_loss\n";
  char buf[160];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f,%.9f\n", m.epoch,
                  m.entity_loss, m.relation_loss, m.joint());
    out << buf;
  }
}

void write_pretrain_metrics_csv(const std::string& path,
                                const std::vector<PretrainEpochMetrics>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out << "epoch,mlm_loss,masked_positions\n";
  char buf[160];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%lld\n", m.epoch, m.mlm_loss,
                  m.masked_positions);
    out << buf;
  }
}

}  // namespace spanmask
