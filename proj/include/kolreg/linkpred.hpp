#pragma once

// Graph autoencoders for link prediction: a two-layer GCN encoder over
// identity node features, an inner-product decoder, weighted cross-entropy
// (plus KL for the variational model) and hand-written reverse mode.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kolreg/bdm.hpp"
#include "kolreg/data.hpp"
#include "kolreg/error.hpp"
#include "kolreg/metrics.hpp"
#include "kolreg/random.hpp"
#include "kolreg/regularizer.hpp"

namespace kolreg {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kProbClamp = 1e-7;

enum class ModelKind { GAE, VGAE };

inline std::string to_string(ModelKind k) { return k == ModelKind::GAE ? "gae" : "vgae"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "gae" || s == "GAE") return ModelKind::GAE;
  if (s == "vgae" || s == "VGAE") return ModelKind::VGAE;
  throw ConfigError("unknown model '" + s + "' (expected gae or vgae)");
}

// Encoder weights. GAE uses w1, w2; VGAE uses w1, w_mu, w_logvar.
struct ModelParams {
  ModelKind kind = ModelKind::GAE;
  Mat w1;
  Mat w2;
  Mat w_mu;
  Mat w_logvar;

  template <typename F>
  void for_each(F&& f) {
    f("w1", w1);
    if (kind == ModelKind::GAE) {
      f("w2", w2);
    } else {
      f("w_mu", w_mu);
      f("w_logvar", w_logvar);
    }
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each([&](const char* name, Mat& m) { f(name, static_cast<const Mat&>(m)); });
  }
};

// Uniform on +-sqrt(6 / (fan_in + fan_out)).
inline Mat glorot_init(int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Mat w(fan_in, fan_out);
  for (int j = 0; j < fan_out; ++j)
    for (int i = 0; i < fan_in; ++i) w(i, j) = rng.uniform(-bound, bound);
  return w;
}

inline ModelParams init_params(ModelKind kind, int n_features, int hidden1, int hidden2, Rng& rng) {
  ModelParams p;
  p.kind = kind;
  p.w1 = glorot_init(n_features, hidden1, rng);
  if (kind == ModelKind::GAE) {
    p.w2 = glorot_init(hidden1, hidden2, rng);
  } else {
    p.w_mu = glorot_init(hidden1, hidden2, rng);
    p.w_logvar = glorot_init(hidden1, hidden2, rng);
  }
  return p;
}

// D^-1/2 (A + I) D^-1/2 with D the degrees of A + I.
inline Mat gcn_normalize(const BinaryMatrix& a) {
  const int n = a.n();
  Eigen::VectorXd inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    if (a(i, i)) throw ConfigError("training adjacency must have a zero diagonal");
    double deg = 1.0;
    for (int j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt(i) = 1.0 / std::sqrt(deg);
  }
  Mat out(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double aij = (i == j) ? 1.0 : static_cast<double>(a(i, j));
      out(i, j) = aij * inv_sqrt(i) * inv_sqrt(j);
    }
  return out;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Everything the backward pass needs from a forward pass.
struct Encoded {
  Mat h_pre;   // A_hat W1 (features are the identity)
  Mat h;       // relu(h_pre)
  Mat ah;      // A_hat H
  Mat mu;      // VGAE only
  Mat logvar;  // VGAE only
  Mat noise;   // VGAE training only; empty means Z = mu
  Mat z;
};

// Node features are the N x N identity, so X W1 is W1 itself.
inline Encoded encode(const Mat& a_hat, const ModelParams& params, const Mat* noise = nullptr) {
  if (params.w1.rows() != a_hat.rows()) throw DimensionMismatch("w1 rows must equal the node count");
  Encoded e;
  e.h_pre = a_hat * params.w1;
  e.h = e.h_pre.cwiseMax(0.0);
  e.ah = a_hat * e.h;
  if (params.kind == ModelKind::GAE) {
    e.z = e.ah * params.w2;
    return e;
  }
  e.mu = e.ah * params.w_mu;
  e.logvar = e.ah * params.w_logvar;
  if (noise) {
    if (noise->rows() != e.mu.rows() || noise->cols() != e.mu.cols()) throw DimensionMismatch("noise shape");
    e.noise = *noise;
    e.z = e.mu + ((0.5 * e.logvar.array()).exp() * noise->array()).matrix();
  } else {
    e.z = e.mu;
  }
  return e;
}

// sigma(Z Z^T), clamped to [eps, 1 - eps].
inline RowMat decode_matrix(const Mat& z) {
  const Mat logits = z * z.transpose();
  RowMat p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index j = 0; j < logits.cols(); ++j)
      p(i, j) = std::clamp(sigmoid(logits(i, j)), kProbClamp, 1.0 - kProbClamp);
  return p;
}

inline BernoulliMatrix to_bernoulli(const RowMat& p) {
  return BernoulliMatrix(static_cast<int>(p.rows()), std::vector<double>(p.data(), p.data() + p.size()));
}

inline BernoulliMatrix decode(const Mat& z) { return to_bernoulli(decode_matrix(z)); }

struct LossParts {
  double bce = 0.0;
  double kl = 0.0;
  double reg = 0.0;
  double total() const { return bce + kl + reg; }
};

// Positive-class weight: #zeros / #ones of the label matrix.
inline double positive_weight(const BinaryMatrix& label) {
  const double ones = static_cast<double>(label.count_ones());
  const double cells = static_cast<double>(label.n()) * static_cast<double>(label.n());
  if (ones == 0.0 || ones == cells) throw DegenerateLabels("label matrix is all zeros or all ones");
  return (cells - ones) / ones;
}

inline double weighted_bce(const RowMat& p, const BinaryMatrix& label) {
  const double w = positive_weight(label);
  const int n = label.n();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double pij = p(i, j);
      s += label(i, j) ? w * std::log(pij) : std::log(1.0 - pij);
    }
  return -s / (static_cast<double>(n) * static_cast<double>(n));
}

// (1/N) * 1/2 * sum(exp(logvar) + mu^2 - 1 - logvar).
inline double kl_divergence(const Mat& mu, const Mat& logvar) {
  const double s = (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array()).sum();
  return 0.5 * s / static_cast<double>(mu.rows());
}

inline LossParts loss(const RowMat& p, const BinaryMatrix& label, ModelKind kind, const Mat& mu, const Mat& logvar,
                      double reg_scalar) {
  LossParts parts;
  parts.bce = weighted_bce(p, label);
  if (kind == ModelKind::VGAE) parts.kl = kl_divergence(mu, logvar);
  parts.reg = reg_scalar;
  return parts;
}

// Gradients for every weight, in the same layout as ModelParams.
using ParamGrads = ModelParams;

// Reverse mode through decode(encode(.)). `reg_grad`, when given, is
// d(loss)/dP from the regularizer (lambda * G, row-major N x N) and is
// added before the sigmoid.
inline ParamGrads backward(const Mat& a_hat, const ModelParams& params, const Encoded& enc, const BinaryMatrix& label,
                           const std::vector<double>* reg_grad = nullptr) {
  const int n = label.n();
  const double inv_cells = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  const double w = positive_weight(label);
  const Mat logits = enc.z * enc.z.transpose();

  Mat d_logits(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double s = sigmoid(logits(i, j));
      if (s < kProbClamp || s > 1.0 - kProbClamp) {
        d_logits(i, j) = 0.0;
        continue;
      }
      const double y = label(i, j);
      double g = -inv_cells * (w * y * (1.0 - s) - (1.0 - y) * s);
      if (reg_grad) g += (*reg_grad)[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] * s * (1.0 - s);
      d_logits(i, j) = g;
    }

  const Mat d_z = (d_logits + d_logits.transpose()) * enc.z;

  ParamGrads grads;
  grads.kind = params.kind;
  Mat d_ah;
  if (params.kind == ModelKind::GAE) {
    grads.w2 = enc.ah.transpose() * d_z;
    d_ah = d_z * params.w2.transpose();
  } else {
    const double inv_n = 1.0 / static_cast<double>(n);
    Mat d_mu = d_z + enc.mu * inv_n;
    Mat d_logvar = 0.5 * inv_n * (enc.logvar.array().exp() - 1.0).matrix();
    if (enc.noise.size() != 0)
      d_logvar.array() += d_z.array() * enc.noise.array() * 0.5 * (0.5 * enc.logvar.array()).exp();
    grads.w_mu = enc.ah.transpose() * d_mu;
    grads.w_logvar = enc.ah.transpose() * d_logvar;
    d_ah = d_mu * params.w_mu.transpose() + d_logvar * params.w_logvar.transpose();
  }
  // A_hat is symmetric.
  const Mat d_h = a_hat * d_ah;
  const Mat d_h_pre = (enc.h_pre.array() > 0.0).cast<double>() * d_h.array();
  grads.w1 = a_hat * d_h_pre;
  return grads;
}

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ModelParams& params, const ParamGrads& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    std::size_t k = 0;
    std::vector<const Mat*> g;
    grads.for_each([&](const char*, const Mat& m) { g.push_back(&m); });
    params.for_each([&](const char*, Mat& w) {
      if (m_.size() <= k) {
        m_.push_back(Mat::Zero(w.rows(), w.cols()));
        v_.push_back(Mat::Zero(w.rows(), w.cols()));
      }
      const Mat& gk = *g[k];
      m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * gk;
      v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * gk.cwiseProduct(gk);
      w.array() -= cfg_.learning_rate * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.eps);
      ++k;
    });
  }

  int steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

// ---- training ---------------------------------------------------------------

struct TrainConfig {
  ModelKind model = ModelKind::GAE;
  int epochs = 1000;
  int trials = 10;
  int hidden1 = 32;
  int hidden2 = 16;
  int block_size = 4;
  AdamConfig adam;
  RegConfig reg;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden sizes must be >= 1");
    if (block_size < 1) throw ConfigError("block size must be >= 1");
    reg.validate();
  }
};

struct EvalScores {
  double auc = 0.0;
  double ap = 0.0;
};

inline ScoredEdges score_edges(const Mat& z, const std::vector<Edge>& pos, const std::vector<Edge>& neg) {
  ScoredEdges s;
  for (const Edge& e : pos) s.add(sigmoid(z.row(e.u).dot(z.row(e.v))), 1);
  for (const Edge& e : neg) s.add(sigmoid(z.row(e.u).dot(z.row(e.v))), 0);
  return s;
}

// Evaluation uses Z = mu for VGAE.
inline EvalScores evaluate(const Mat& a_hat, const ModelParams& params, const std::vector<Edge>& pos,
                           const std::vector<Edge>& neg) {
  const Encoded e = encode(a_hat, params);
  const ScoredEdges s = score_edges(e.z, pos, neg);
  return {auc(s), average_precision(s)};
}

struct TrialResult {
  double best_val_auc = -1.0;
  double best_val_ap = -1.0;
  int best_auc_epoch = -1;
  int best_ap_epoch = -1;
  ModelParams best_auc_params;
  ModelParams best_ap_params;
  EvalScores test_at_best_auc;  // test scores of the best-validation-AUC weights
  EvalScores test_at_best_ap;   // test scores of the best-validation-AP weights
  std::vector<LossParts> loss_trace;

  double test_auc() const { return test_at_best_auc.auc; }
  double test_ap() const { return test_at_best_ap.ap; }
};

// One training run. `cost` prices blocks for the regularizer and is ignored
// when cfg.reg.mode is None. The gradient sample for epoch e is drawn with
// seed derive_seed(cfg.reg.seed, e).
inline TrialResult train(const GraphData& data, const SplitData& splits, const TrainConfig& cfg,
                         const BlockCost* cost = nullptr) {
  cfg.validate();
  const bool regularize = cfg.reg.mode != RegMode::None;
  if (regularize && !cost) throw ConfigError("regularized training needs a block cost");
  if (regularize && cost->block_side() != cfg.block_size) throw DimensionMismatch("block cost side differs from R");

  const Mat a_hat = gcn_normalize(data.a_train);
  Rng init_rng(derive_seed(cfg.seed, 0));
  Rng noise_rng(derive_seed(cfg.seed, 1));
  ModelParams params = init_params(cfg.model, data.n, cfg.hidden1, cfg.hidden2, init_rng);
  Adam opt(cfg.adam);

  TrialResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));
  Mat noise;
  std::vector<double> reg_grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Mat* noise_ptr = nullptr;
    if (cfg.model == ModelKind::VGAE) {
      noise.resize(data.n, cfg.hidden2);
      for (Eigen::Index j = 0; j < noise.cols(); ++j)
        for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = noise_rng.normal();
      noise_ptr = &noise;
    }
    const Encoded enc = encode(a_hat, params, noise_ptr);
    const RowMat p = decode_matrix(enc.z);

    double reg_scalar = 0.0;
    const std::vector<double>* reg_ptr = nullptr;
    if (regularize) {
      const BernoulliMatrix bern = to_bernoulli(p);
      const GradientSample g =
          grad_sample(bern, *cost, cfg.reg.m, derive_seed(cfg.reg.seed, static_cast<std::uint64_t>(epoch)));
      reg_scalar = reg_term(bern, g, cfg.reg.lambda);
      reg_grad = reg_backward(g, cfg.reg.lambda);
      reg_ptr = &reg_grad;
    }
    const LossParts parts = loss(p, data.label, cfg.model, enc.mu, enc.logvar, reg_scalar);
    if (!std::isfinite(parts.total()))
      throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch));
    result.loss_trace.push_back(parts);

    opt.step(params, backward(a_hat, params, enc, data.label, reg_ptr));

    const EvalScores val = evaluate(a_hat, params, splits.val_pos, splits.val_neg);
    if (val.auc > result.best_val_auc) {
      result.best_val_auc = val.auc;
      result.best_auc_epoch = epoch;
      result.best_auc_params = params;
    }
    if (val.ap > result.best_val_ap) {
      result.best_val_ap = val.ap;
      result.best_ap_epoch = epoch;
      result.best_ap_params = params;
    }
  }
  result.test_at_best_auc = evaluate(a_hat, result.best_auc_params, splits.test_pos, splits.test_neg);
  result.test_at_best_ap = evaluate(a_hat, result.best_ap_params, splits.test_pos, splits.test_neg);
  return result;
}

// ---- weight snapshots ---------------------------------------------------------
//
// Line 1 is a JSON header:
//   {"format":"kolreg-weights","version":1,"model":"gae","seed":7,
//    "tensors":[{"name":"w1","rows":105,"cols":32},...]}
// followed, for each tensor in header order, by `rows` lines of `cols`
// space-separated values (shortest round-trip decimal).

inline void write_params(const ModelParams& params, std::uint64_t seed, std::ostream& os) {
  nlohmann::json header;
  header["format"] = "kolreg-weights";
  header["version"] = 1;
  header["model"] = to_string(params.kind);
  header["seed"] = seed;
  header["tensors"] = nlohmann::json::array();
  params.for_each([&](const char* name, const Mat& m) {
    header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  os << header.dump() << '\n';
  params.for_each([&](const char*, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) os << ' ';
        os << detail::format_double(m(i, j));
      }
      os << '\n';
    }
  });
}

struct Snapshot {
  ModelParams params;
  std::uint64_t seed = 0;
};

inline Snapshot read_params(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("missing snapshot header", 1);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad snapshot header: ") + e.what(), 1);
  }
  if (header.value("format", "") != "kolreg-weights") throw ParseError("not a weight snapshot", 1);
  Snapshot snap;
  snap.params.kind = parse_model_kind(header.at("model").get<std::string>());
  snap.seed = header.value("seed", std::uint64_t{0});
  std::size_t lineno = 1;
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!std::getline(is, line)) throw ParseError("truncated tensor '" + name + "'", lineno + 1);
      ++lineno;
      std::istringstream ls(line);
      for (Eigen::Index j = 0; j < cols; ++j) {
        std::string tok;
        if (!(ls >> tok)) throw ParseError("short row in tensor '" + name + "'", lineno);
        double v = 0.0;
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) throw ParseError("bad value '" + tok + "'", lineno);
        m(i, j) = v;
      }
    }
    if (name == "w1") snap.params.w1 = std::move(m);
    else if (name == "w2") snap.params.w2 = std::move(m);
    else if (name == "w_mu") snap.params.w_mu = std::move(m);
    else if (name == "w_logvar") snap.params.w_logvar = std::move(m);
    else throw ParseError("unknown tensor '" + name + "'", 1);
  }
  return snap;
}

inline void save_params(const ModelParams& params, std::uint64_t seed, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_params(params, seed, os);
}

inline Snapshot load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_params(is);
}

}  // namespace kolreg
