#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "talents/core/error.hpp"
#include "talents/core/rng.hpp"

namespace talents::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// A trainable tensor with its gradient and Adam moments.
template <class T>
struct Param {
  std::string name;
  Mat<T> value, grad, m, v;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Mat<T>::Zero(rows, cols);
    grad = Mat<T>::Zero(rows, cols);
    m = Mat<T>::Zero(rows, cols);
    v = Mat<T>::Zero(rows, cols);
  }
};

template <class T>
using ParamList = std::vector<Param<T>*>;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
template <class T>
void init_uniform(Param<T>& p, int fan_in, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = static_cast<T>((2.0 * rng.uniform() - 1.0) * a);
}

template <class T>
void zero_grad(const ParamList<T>& ps) {
  for (auto* p : ps) p->grad.setZero();
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// y = W x + b over a batch of column vectors.
template <class T>
struct Dense {
  Param<T> W, b;

  void init(const std::string& name, int in, int out, Rng& rng) {
    W.name = name + ".W";
    b.name = name + ".b";
    W.resize(out, in);
    b.resize(out, 1);
    init_uniform(W, in, rng);
    init_uniform(b, in, rng);
  }
  int in() const { return static_cast<int>(W.value.cols()); }
  int out() const { return static_cast<int>(W.value.rows()); }

  Mat<T> forward(const Mat<T>& X) const { return (W.value * X).colwise() + b.value.col(0); }

  /// Accumulates parameter gradients; returns dL/dX.
  Mat<T> backward(const Mat<T>& X, const Mat<T>& dY) {
    W.grad.noalias() += dY * X.transpose();
    b.grad.col(0) += dY.rowwise().sum();
    return W.value.transpose() * dY;
  }

  ParamList<T> params() { return {&W, &b}; }
};

/// GRU cell with reset gate applied after the hidden projection:
///   r = σ(Wi_r x + bi_r + Wh_r h + bh_r)
///   u = σ(Wi_u x + bi_u + Wh_u h + bh_u)
///   n = tanh(Wi_n x + bi_n + r ⊙ (Wh_n h + bh_n))
///   h' = (1 - u) ⊙ n + u ⊙ h
template <class T>
struct Gru {
  Param<T> Wi, Wh, bi, bh;  // stacked [r; u; n]
  int hidden = 0;

  struct Cache {
    Mat<T> x, h, r, u, n, hn;
  };

  void init(const std::string& name, int in, int hid, Rng& rng) {
    hidden = hid;
    Wi.name = name + ".Wi";
    Wh.name = name + ".Wh";
    bi.name = name + ".bi";
    bh.name = name + ".bh";
    Wi.resize(3 * hid, in);
    Wh.resize(3 * hid, hid);
    bi.resize(3 * hid, 1);
    bh.resize(3 * hid, 1);
    init_uniform(Wi, hid, rng);
    init_uniform(Wh, hid, rng);
    init_uniform(bi, hid, rng);
    init_uniform(bh, hid, rng);
  }
  int in() const { return static_cast<int>(Wi.value.cols()); }

  Mat<T> step(const Mat<T>& x, const Mat<T>& h, Cache* c) const {
    const Eigen::Index H = hidden;
    const Mat<T> gi = (Wi.value * x).colwise() + bi.value.col(0);
    const Mat<T> gh = (Wh.value * h).colwise() + bh.value.col(0);
    Mat<T> r = (gi.topRows(H) + gh.topRows(H)).unaryExpr([](T v) { return sigmoid(v); });
    Mat<T> u = (gi.middleRows(H, H) + gh.middleRows(H, H)).unaryExpr([](T v) { return sigmoid(v); });
    Mat<T> hn = gh.bottomRows(H);
    Mat<T> n = (gi.bottomRows(H).array() + r.array() * hn.array()).tanh().matrix();
    Mat<T> out = ((T(1) - u.array()) * n.array() + u.array() * h.array()).matrix();
    if (c) *c = {x, h, std::move(r), std::move(u), std::move(n), std::move(hn)};
    return out;
  }

  /// Backward through one step. Accumulates parameter gradients, writes
  /// dL/dx to dx (if non-null) and returns dL/dh_prev.
  Mat<T> step_backward(const Cache& c, const Mat<T>& dh_out, Mat<T>* dx) {
    const Eigen::Index H = hidden;
    const auto one = T(1);
    const Mat<T> dn = (dh_out.array() * (one - c.u.array())).matrix();
    const Mat<T> du = (dh_out.array() * (c.h.array() - c.n.array())).matrix();
    Mat<T> dh_prev = (dh_out.array() * c.u.array()).matrix();
    const Mat<T> dn_pre = (dn.array() * (one - c.n.array().square())).matrix();
    const Mat<T> dr = (dn_pre.array() * c.hn.array()).matrix();
    const Mat<T> dr_pre = (dr.array() * c.r.array() * (one - c.r.array())).matrix();
    const Mat<T> du_pre = (du.array() * c.u.array() * (one - c.u.array())).matrix();
    const Eigen::Index B = dh_out.cols();
    Mat<T> gi(3 * H, B), gh(3 * H, B);
    gi.topRows(H) = dr_pre;
    gi.middleRows(H, H) = du_pre;
    gi.bottomRows(H) = dn_pre;
    gh.topRows(H) = dr_pre;
    gh.middleRows(H, H) = du_pre;
    gh.bottomRows(H) = (dn_pre.array() * c.r.array()).matrix();
    Wi.grad.noalias() += gi * c.x.transpose();
    bi.grad.col(0) += gi.rowwise().sum();
    Wh.grad.noalias() += gh * c.h.transpose();
    bh.grad.col(0) += gh.rowwise().sum();
    dh_prev.noalias() += Wh.value.transpose() * gh;
    if (dx) *dx = Wi.value.transpose() * gi;
    return dh_prev;
  }

  ParamList<T> params() { return {&Wi, &Wh, &bi, &bh}; }
};

/// Numerically stable column-wise softmax.
template <class T>
Mat<T> softmax_cols(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const T mx = logits.col(j).maxCoeff();
    const auto e = (logits.col(j).array() - mx).exp();
    out.col(j) = (e / e.sum()).matrix();
  }
  return out;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

/// Adam with bias correction and optional global-norm clipping.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  double grad_norm(const ParamList<T>& ps) const {
    double s = 0.0;
    for (auto* p : ps) s += static_cast<double>(p->grad.squaredNorm());
    return std::sqrt(s);
  }

  void step(const ParamList<T>& ps) {
    ++t_;
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
      const double n = grad_norm(ps);
      if (n > cfg_.clip_norm) scale = cfg_.clip_norm / n;
    }
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.lr / c1), eps = static_cast<T>(cfg_.eps);
    const T inv_c2 = static_cast<T>(1.0 / c2), sc = static_cast<T>(scale);
    for (auto* p : ps) {
      p->m = b1 * p->m + (T(1) - b1) * (sc * p->grad);
      p->v = b2 * p->v + (T(1) - b2) * (sc * p->grad).cwiseAbs2();
      p->value.array() -= lr * p->m.array() / ((p->v.array() * inv_c2).sqrt() + eps);
    }
  }
  long steps() const { return t_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

template <class T>
bool all_finite(const ParamList<T>& ps) {
  for (auto* p : ps)
    if (!p->value.allFinite()) return false;
  return true;
}

}  // namespace talents::nn
