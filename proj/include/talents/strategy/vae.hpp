#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "talents/core/error.hpp"
#include "talents/core/hash.hpp"
#include "talents/core/rng.hpp"
#include "talents/kitchen/trajectory.hpp"
#include "talents/strategy/checkpoint.hpp"
#include "talents/strategy/nn.hpp"

namespace talents::strategy {

using nn::Mat;
using nn::Vec;
using json = nlohmann::json;

inline constexpr int kNumMacro = kitchen::kNumMacroActions;
inline constexpr int kStartToken = kNumMacro;  // decoder input vocabulary has one extra symbol
inline constexpr double kLogVarMin = -8.0;
inline constexpr double kLogVarMax = 4.0;

struct VaeConfig {
  int latent_dim = 8;
  int window = 40;   // history ticks fed to the encoder
  int horizon = 5;   // macro actions predicted by the decoder
  double beta = 0.5;
  int batch_size = 32;
  double step_size = 1e-3;
  int epochs = 10;
  std::uint64_t seed = 0;
  int enc_hidden = 64;
  int dec_hidden = 64;
  int max_windows = 0;  // > 0: train on a fixed random subset of this many windows
  // Training-time decoder input dropout: probability of zeroing o_t, and of
  // replacing a teacher-forced previous token with the start token.
  double obs_dropout = 0.0;
  double token_dropout = 0.0;

  void validate() const {
    if (latent_dim < 1 || window < 1 || horizon < 1) throw ConfigError("vae config: d, h and H must be >= 1");
    if (!(beta >= 0.0)) throw ConfigError("vae config: beta must be >= 0");
    if (!(obs_dropout >= 0.0 && obs_dropout <= 1.0) || !(token_dropout >= 0.0 && token_dropout <= 1.0))
      throw ConfigError("vae config: dropout rates must lie in [0, 1]");
    if (batch_size < 1 || epochs < 0 || enc_hidden < 1 || dec_hidden < 1 || !(step_size > 0.0))
      throw ConfigError("vae config: invalid optimisation settings");
  }

  json to_json() const {
    return {{"latent_dim", latent_dim}, {"window", window},       {"horizon", horizon},
            {"beta", beta},             {"batch_size", batch_size}, {"step_size", step_size},
            {"epochs", epochs},         {"seed", seed},           {"enc_hidden", enc_hidden},
            {"dec_hidden", dec_hidden}, {"max_windows", max_windows},
            {"obs_dropout", obs_dropout}, {"token_dropout", token_dropout}};
  }
  static VaeConfig from_json(const json& j) {
    VaeConfig c;
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.window = j.value("window", c.window);
    c.horizon = j.value("horizon", c.horizon);
    c.beta = j.value("beta", c.beta);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.step_size = j.value("step_size", c.step_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.enc_hidden = j.value("enc_hidden", c.enc_hidden);
    c.dec_hidden = j.value("dec_hidden", c.dec_hidden);
    c.max_windows = j.value("max_windows", c.max_windows);
    c.obs_dropout = j.value("obs_dropout", c.obs_dropout);
    c.token_dropout = j.value("token_dropout", c.token_dropout);
    return c;
  }
  std::uint64_t hash() const { return hash_string(to_json().dump()); }
};

/// Encoder q(z | window) and autoregressive decoder p(a_{t:t+H} | z, o_t).
///
/// Encoder: GRU over [o_k ; onehot(a_k)] for the window, then linear heads
/// for the posterior mean and (clamped) log-variance.
/// Decoder: h_0 = tanh(W [z ; o_t] + b); each step feeds [onehot(prev) ; z]
/// where prev is a start token at step 0 and the previous target afterwards
/// (teacher forcing); a linear head gives logits over the macro vocabulary.
template <class T>
struct VaeModel {
  VaeConfig cfg;
  int obs_dim = 0;
  nn::Gru<T> enc;
  nn::Dense<T> enc_mean, enc_logvar;
  nn::Dense<T> dec_init;
  nn::Gru<T> dec;
  nn::Dense<T> dec_out;

  int input_dim() const { return obs_dim + kitchen::kNumPrimitiveActions; }
  int dec_input_dim() const { return kNumMacro + 1 + cfg.latent_dim; }

  void init(const VaeConfig& c, int obs, std::uint64_t seed) {
    c.validate();
    cfg = c;
    obs_dim = obs;
    Rng rng(seed);
    enc.init("enc.gru", input_dim(), cfg.enc_hidden, rng);
    enc_mean.init("enc.mean", cfg.enc_hidden, cfg.latent_dim, rng);
    enc_logvar.init("enc.logvar", cfg.enc_hidden, cfg.latent_dim, rng);
    dec_init.init("dec.init", cfg.latent_dim + obs_dim, cfg.dec_hidden, rng);
    dec.init("dec.gru", dec_input_dim(), cfg.dec_hidden, rng);
    dec_out.init("dec.out", cfg.dec_hidden, kNumMacro, rng);
  }

  nn::ParamList<T> params() {
    nn::ParamList<T> out;
    for (auto* p : enc.params()) out.push_back(p);
    for (auto* p : enc_mean.params()) out.push_back(p);
    for (auto* p : enc_logvar.params()) out.push_back(p);
    for (auto* p : dec_init.params()) out.push_back(p);
    for (auto* p : dec.params()) out.push_back(p);
    for (auto* p : dec_out.params()) out.push_back(p);
    return out;
  }
  nn::ParamList<T> encoder_params() {
    nn::ParamList<T> out;
    for (auto* p : enc.params()) out.push_back(p);
    for (auto* p : enc_mean.params()) out.push_back(p);
    for (auto* p : enc_logvar.params()) out.push_back(p);
    return out;
  }
  nn::ParamList<T> decoder_params() {
    nn::ParamList<T> out;
    for (auto* p : dec_init.params()) out.push_back(p);
    for (auto* p : dec.params()) out.push_back(p);
    for (auto* p : dec_out.params()) out.push_back(p);
    return out;
  }

  /// Copy with a different scalar type (e.g. float training -> double eval).
  template <class U>
  VaeModel<U> cast() const {
    VaeModel<U> m;
    m.init(cfg, obs_dim, 0);
    auto src = const_cast<VaeModel*>(this)->params();
    auto dst = m.params();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    return m;
  }
};

/// One minibatch. window[k] holds step k of every sample as columns.
template <class T>
struct Batch {
  std::vector<Mat<T>> window;  // h entries, each input_dim x B
  Mat<T> obs;                  // obs_dim x B, o_t at the prediction point
  Eigen::MatrixXi targets;     // H x B macro ids
  Eigen::MatrixXi token_keep;  // H x B, 0 feeds the start token instead of targets(k-1); empty keeps all
  int size() const { return static_cast<int>(obs.cols()); }
};

struct ElboResult {
  // Extended precision, so differences of nearby losses (finite-difference
  // checks) are not swamped by rounding.
  long double loss = 0.0;   // recon + beta * kl, batch mean
  long double recon = 0.0;  // negative log-likelihood of the H targets, batch mean
  long double kl = 0.0;     // KL(q || N(0, I)), batch mean
};

namespace detail {

template <class T>
Mat<T> clamp_logvar(const Mat<T>& raw) {
  return raw.unaryExpr([](T v) { return std::clamp(v, static_cast<T>(kLogVarMin), static_cast<T>(kLogVarMax)); });
}

template <class T>
Mat<T> onehot_rows(const Eigen::VectorXi& ids, int vocab, int extra_rows) {
  Mat<T> out = Mat<T>::Zero(vocab + extra_rows, ids.size());
  for (Eigen::Index j = 0; j < ids.size(); ++j) out(ids(j), j) = T(1);
  return out;
}

}  // namespace detail

/// Posterior mean and clamped log-variance for a batch of windows.
template <class T>
std::pair<Mat<T>, Mat<T>> encode(const VaeModel<T>& m, const std::vector<Mat<T>>& window) {
  require(static_cast<int>(window.size()) == m.cfg.window, "encode: window length must equal h");
  const Eigen::Index B = window.front().cols();
  Mat<T> h = Mat<T>::Zero(m.cfg.enc_hidden, B);
  for (const auto& x : window) {
    require(x.rows() == m.input_dim() && x.cols() == B, "encode: window step has the wrong shape");
    h = m.enc.step(x, h, nullptr);
  }
  return {m.enc_mean.forward(h), detail::clamp_logvar<T>(m.enc_logvar.forward(h))};
}

/// Decoder categoricals (one column per sample) for each of the H steps,
/// teacher-forced on `targets` (only targets[0..H-2] are consumed).
template <class T>
std::vector<Mat<T>> decode_probs(const VaeModel<T>& m, const Mat<T>& z, const Mat<T>& obs, const Eigen::MatrixXi& targets) {
  const Eigen::Index B = z.cols();
  Mat<T> in0(m.cfg.latent_dim + m.obs_dim, B);
  in0 << z, obs;
  Mat<T> h = m.dec_init.forward(in0).array().tanh().matrix();
  Eigen::VectorXi prev = Eigen::VectorXi::Constant(B, kStartToken);
  std::vector<Mat<T>> out;
  for (int k = 0; k < m.cfg.horizon; ++k) {
    Mat<T> x(m.dec_input_dim(), B);
    x << detail::onehot_rows<T>(prev, kNumMacro + 1, 0), z;
    h = m.dec.step(x, h, nullptr);
    out.push_back(nn::softmax_cols<T>(m.dec_out.forward(h)));
    if (k + 1 < m.cfg.horizon) prev = targets.row(k).transpose();
  }
  return out;
}

/// First-step categorical p(a_t | z, o_t) for a batch of (z, o) columns.
template <class T>
Mat<T> first_step_probs(const VaeModel<T>& m, const Mat<T>& z, const Mat<T>& obs) {
  const Eigen::Index B = z.cols();
  require(z.rows() == m.cfg.latent_dim && obs.rows() == m.obs_dim && obs.cols() == B,
          "first_step_probs: shape mismatch");
  Mat<T> in0(m.cfg.latent_dim + m.obs_dim, B);
  in0 << z, obs;
  const Mat<T> h0 = m.dec_init.forward(in0).array().tanh().matrix();
  Mat<T> x(m.dec_input_dim(), B);
  x << detail::onehot_rows<T>(Eigen::VectorXi::Constant(B, kStartToken), kNumMacro + 1, 0), z;
  return nn::softmax_cols<T>(m.dec_out.forward(m.dec.step(x, h0, nullptr)));
}

/// Negative ELBO with a single reparameterised sample z = m + exp(s/2) * noise.
/// When `grads` is set, parameter gradients of the batch-mean loss are
/// accumulated into the model (callers zero them first).
template <class T>
ElboResult elbo_loss(VaeModel<T>& m, const Batch<T>& b, double beta, const Mat<T>& noise, bool grads = true) {
  const VaeConfig& cfg = m.cfg;
  const int B = b.size();
  require(static_cast<int>(b.window.size()) == cfg.window, "elbo_loss: window length must equal h");
  require(b.targets.rows() == cfg.horizon && b.targets.cols() == B, "elbo_loss: target length must equal H");
  require(b.obs.rows() == m.obs_dim, "elbo_loss: observation size mismatch");
  require(noise.rows() == cfg.latent_dim && noise.cols() == B, "elbo_loss: noise shape mismatch");
  for (const auto& x : b.window) require(x.rows() == m.input_dim() && x.cols() == B, "elbo_loss: window shape mismatch");
  const T invB = T(1) / static_cast<T>(B);

  // Encoder.
  std::vector<typename nn::Gru<T>::Cache> ec(static_cast<std::size_t>(cfg.window));
  Mat<T> h = Mat<T>::Zero(cfg.enc_hidden, B);
  for (int t = 0; t < cfg.window; ++t) h = m.enc.step(b.window[static_cast<std::size_t>(t)], h, &ec[static_cast<std::size_t>(t)]);
  const Mat<T> hT = h;
  const Mat<T> mu = m.enc_mean.forward(hT);
  const Mat<T> sraw = m.enc_logvar.forward(hT);
  const Mat<T> s = detail::clamp_logvar<T>(sraw);
  const Mat<T> sd = (s.array() * T(0.5)).exp().matrix();
  const Mat<T> z = (mu.array() + sd.array() * noise.array()).matrix();

  // Decoder.
  Mat<T> in0(cfg.latent_dim + m.obs_dim, B);
  in0 << z, b.obs;
  const Mat<T> h0 = m.dec_init.forward(in0).array().tanh().matrix();
  std::vector<typename nn::Gru<T>::Cache> dc(static_cast<std::size_t>(cfg.horizon));
  std::vector<Mat<T>> hs, dlogits;
  Mat<T> hd = h0;
  Eigen::VectorXi prev = Eigen::VectorXi::Constant(B, kStartToken);
  long double recon = 0.0;
  for (int k = 0; k < cfg.horizon; ++k) {
    Mat<T> x(m.dec_input_dim(), B);
    x << detail::onehot_rows<T>(prev, kNumMacro + 1, 0), z;
    hd = m.dec.step(x, hd, &dc[static_cast<std::size_t>(k)]);
    hs.push_back(hd);
    Mat<T> p = nn::softmax_cols<T>(m.dec_out.forward(hd));
    for (int j = 0; j < B; ++j) {
      const int tgt = b.targets(k, j);
      require(tgt >= 0 && tgt < kNumMacro, "elbo_loss: target outside the macro vocabulary");
      recon -= std::log(std::max(static_cast<long double>(p(tgt, j)), 1e-300L));
      p(tgt, j) -= T(1);
    }
    dlogits.push_back(p * invB);
    prev = b.targets.row(k).transpose();
    if (b.token_keep.size() > 0 && k + 1 < cfg.horizon)
      for (int j = 0; j < B; ++j)
        if (b.token_keep(k + 1, j) == 0) prev(j) = kStartToken;
  }
  recon /= B;
  long double kl = 0.0;
  for (int j = 0; j < B; ++j)
    for (int i = 0; i < cfg.latent_dim; ++i) {
      const long double si = s(i, j), mi = mu(i, j);
      kl += 0.5L * (std::exp(si) + mi * mi - 1.0L - si);
    }
  kl /= B;
  ElboResult res{recon + static_cast<long double>(beta) * kl, recon, kl};
  if (!grads) return res;

  // Backward: decoder steps in reverse.
  const int d = cfg.latent_dim;
  Mat<T> dz = Mat<T>::Zero(d, B);
  Mat<T> dh_next = Mat<T>::Zero(cfg.dec_hidden, B);
  for (int k = cfg.horizon - 1; k >= 0; --k) {
    Mat<T> dh = m.dec_out.backward(hs[static_cast<std::size_t>(k)], dlogits[static_cast<std::size_t>(k)]) + dh_next;
    Mat<T> dx;
    dh_next = m.dec.step_backward(dc[static_cast<std::size_t>(k)], dh, &dx);
    dz += dx.bottomRows(d);
  }
  const Mat<T> da0 = (dh_next.array() * (T(1) - h0.array().square())).matrix();
  dz += m.dec_init.backward(in0, da0).topRows(d);

  // Reparameterisation and KL.
  const T bt = static_cast<T>(beta);
  const Mat<T> dmu = dz + bt * invB * mu;
  Mat<T> ds = (dz.array() * noise.array() * sd.array() * T(0.5) + bt * invB * T(0.5) * (s.array().exp() - T(1))).matrix();
  for (Eigen::Index j = 0; j < ds.cols(); ++j)
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
      if (sraw(i, j) < static_cast<T>(kLogVarMin) || sraw(i, j) > static_cast<T>(kLogVarMax)) ds(i, j) = T(0);
  Mat<T> dh_enc = m.enc_mean.backward(hT, dmu) + m.enc_logvar.backward(hT, ds);
  for (int t = cfg.window - 1; t >= 0; --t) dh_enc = m.enc.step_backward(ec[static_cast<std::size_t>(t)], dh_enc, nullptr);
  return res;
}

// ---------------------------------------------------------------------------
// Training data: per-seat streams cut into (window, o_t, next-H labels).
// ---------------------------------------------------------------------------

/// One seat of one trajectory: the modeled partner's observations, primitive
/// actions and macro labels.
struct SeatStream {
  std::string policy;
  std::string layout;
  std::size_t trajectory = 0;
  int seat = 0;
  int obs_dim = 0;
  std::vector<float> obs;  // ticks x obs_dim
  std::vector<std::uint8_t> actions;
  std::vector<kitchen::MacroLabel> labels;
  int ticks() const { return static_cast<int>(actions.size()); }
};

/// A training sample: the window ends at `anchor` (exclusive) and the
/// targets are labels [label, label + H).
struct WindowRef {
  int stream = 0;
  int anchor = 0;
  int label = 0;
};

struct SequenceData {
  int obs_dim = 0;
  std::vector<SeatStream> streams;
  std::vector<WindowRef> windows;  // samples with a full H-label target

  /// Decision points of a stream: one per label, at the tick after the
  /// previous label (tick 0 for the first).
  static std::vector<WindowRef> anchors(const SeatStream& st, int stream_index) {
    std::vector<WindowRef> out;
    for (std::size_t i = 0; i < st.labels.size(); ++i) {
      const int anchor = i == 0 ? 0 : st.labels[i - 1].tick + 1;
      out.push_back({stream_index, std::min(anchor, st.ticks() - 1), static_cast<int>(i)});
    }
    return out;
  }
};

inline SeatStream seat_stream(const kitchen::Trajectory& t, int seat, std::size_t index) {
  SeatStream st;
  st.policy = t.policy_ids[static_cast<std::size_t>(seat)];
  st.layout = t.layout;
  st.trajectory = index;
  st.seat = seat;
  st.labels = t.labels[static_cast<std::size_t>(seat)];
  if (t.steps.empty()) throw ConfigError("trajectory has no recorded steps");
  st.obs_dim = static_cast<int>(t.steps.front().obs[static_cast<std::size_t>(seat)].size());
  st.obs.reserve(t.steps.size() * static_cast<std::size_t>(st.obs_dim));
  for (const auto& s : t.steps) {
    const auto& o = s.obs[static_cast<std::size_t>(seat)];
    if (static_cast<int>(o.size()) != st.obs_dim) throw FormatError("trajectory observation length changes mid-episode");
    st.obs.insert(st.obs.end(), o.begin(), o.end());
    st.actions.push_back(static_cast<std::uint8_t>(s.actions[static_cast<std::size_t>(seat)]));
  }
  return st;
}

/// Builds both seat streams of every trajectory and every full-horizon window.
/// Streams whose policy id is in `skip` (e.g. a scripted filler partner) are
/// kept for indexing but contribute no windows.
inline SequenceData build_sequence_data(const std::vector<kitchen::Trajectory>& trajs, int horizon,
                                        const std::set<std::string>& skip = {}) {
  SequenceData d;
  for (std::size_t i = 0; i < trajs.size(); ++i)
    for (int seat = 0; seat < 2; ++seat) {
      SeatStream st = seat_stream(trajs[i], seat, i);
      if (d.obs_dim == 0) d.obs_dim = st.obs_dim;
      if (st.obs_dim != d.obs_dim) throw FormatError("trajectories disagree on observation length");
      const int idx = static_cast<int>(d.streams.size());
      if (!skip.contains(st.policy))
        for (const auto& w : SequenceData::anchors(st, idx))
        if (w.label + horizon <= static_cast<int>(st.labels.size())) d.windows.push_back(w);
      d.streams.push_back(std::move(st));
    }
  return d;
}

/// Writes window step k ([o ; onehot(a)] at tick anchor - h + k, zeros
/// before tick 0) for sample column j.
template <class T>
void fill_window(const SeatStream& st, int anchor, int h, std::vector<Mat<T>>& window, Eigen::Index j) {
  const int D = st.obs_dim;
  for (int k = 0; k < h; ++k) {
    auto col = window[static_cast<std::size_t>(k)].col(j);
    const int tick = anchor - h + k;
    if (tick < 0) {
      col.setZero();
      continue;
    }
    const float* o = st.obs.data() + static_cast<std::size_t>(tick) * static_cast<std::size_t>(D);
    for (int i = 0; i < D; ++i) col(i) = static_cast<T>(o[i]);
    col.tail(kitchen::kNumPrimitiveActions).setZero();
    col(D + st.actions[static_cast<std::size_t>(tick)]) = T(1);
  }
}

template <class T>
void fill_obs(const SeatStream& st, int tick, Mat<T>& obs, Eigen::Index j) {
  const float* o = st.obs.data() + static_cast<std::size_t>(tick) * static_cast<std::size_t>(st.obs_dim);
  for (int i = 0; i < st.obs_dim; ++i) obs(i, j) = static_cast<T>(o[i]);
}

template <class T>
Batch<T> make_batch(const SequenceData& d, const std::vector<WindowRef>& refs, int h, int H) {
  const auto B = static_cast<Eigen::Index>(refs.size());
  Batch<T> b;
  b.window.assign(static_cast<std::size_t>(h), Mat<T>::Zero(d.obs_dim + kitchen::kNumPrimitiveActions, B));
  b.obs = Mat<T>::Zero(d.obs_dim, B);
  b.targets = Eigen::MatrixXi::Zero(H, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const auto& r = refs[static_cast<std::size_t>(j)];
    const SeatStream& st = d.streams[static_cast<std::size_t>(r.stream)];
    fill_window(st, r.anchor, h, b.window, j);
    fill_obs(st, r.anchor, b.obs, j);
    for (int k = 0; k < H; ++k) {
      const auto li = static_cast<std::size_t>(r.label + k);
      b.targets(k, j) = li < st.labels.size() ? static_cast<int>(st.labels[li].action) : 0;
    }
  }
  return b;
}

/// Posterior mean (the embedding) of one window.
template <class T>
Vec<T> embed(const VaeModel<T>& m, const std::vector<Mat<T>>& window) {
  return encode(m, window).first.col(0);
}

/// Mean embedding over all decision points of a stream (one point per
/// trajectory seat for clustering).
template <class T>
Eigen::VectorXd stream_embedding(const VaeModel<T>& m, const SequenceData& d, int stream, int chunk = 64) {
  const SeatStream& st = d.streams[static_cast<std::size_t>(stream)];
  auto refs = SequenceData::anchors(st, stream);
  if (refs.empty()) refs.push_back({stream, st.ticks() - 1, 0});
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.cfg.latent_dim);
  for (std::size_t off = 0; off < refs.size(); off += static_cast<std::size_t>(chunk)) {
    const std::vector<WindowRef> part(refs.begin() + static_cast<std::ptrdiff_t>(off),
                                      refs.begin() + static_cast<std::ptrdiff_t>(std::min(refs.size(), off + static_cast<std::size_t>(chunk))));
    const Batch<T> b = make_batch<T>(d, part, m.cfg.window, 1);
    sum += encode(m, b.window).first.template cast<double>().rowwise().sum();
  }
  return sum / static_cast<double>(refs.size());
}

/// Top-1 accuracy of the first predicted macro using z = posterior mean.
template <class T>
double next_macro_accuracy(const VaeModel<T>& m, const SequenceData& d, const std::vector<WindowRef>& refs, int chunk = 128) {
  if (refs.empty()) return 0.0;
  long hits = 0;
  for (std::size_t off = 0; off < refs.size(); off += static_cast<std::size_t>(chunk)) {
    const std::vector<WindowRef> part(refs.begin() + static_cast<std::ptrdiff_t>(off),
                                      refs.begin() + static_cast<std::ptrdiff_t>(std::min(refs.size(), off + static_cast<std::size_t>(chunk))));
    const Batch<T> b = make_batch<T>(d, part, m.cfg.window, m.cfg.horizon);
    const Mat<T> p = first_step_probs(m, encode(m, b.window).first, b.obs);
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      Eigen::Index arg;
      p.col(j).maxCoeff(&arg);
      hits += arg == b.targets(0, j) ? 1 : 0;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(refs.size());
}

struct EpochStats {
  double loss = 0.0, recon = 0.0, kl = 0.0;
};

template <class T>
struct VaeTrainResult {
  VaeModel<T> model;
  std::vector<EpochStats> curve;
};

/// Minibatch Adam on the negative ELBO. Deterministic given cfg.seed.
/// Throws TrainingError naming the epoch and batch on a non-finite loss.
template <class T = float>
VaeTrainResult<T> train_vae(const SequenceData& data, const VaeConfig& cfg,
                            const std::function<void(int, const EpochStats&)>& on_epoch = {}) {
  cfg.validate();
  if (data.windows.empty()) throw ConfigError("train_vae: dataset has no labelled windows");
  VaeTrainResult<T> out;
  out.model.init(cfg, data.obs_dim, derive_seed(cfg.seed, 0x7ae));
  Rng rng(derive_seed(cfg.seed, 0xba7c));
  std::vector<WindowRef> pool = data.windows;
  if (cfg.max_windows > 0 && static_cast<int>(pool.size()) > cfg.max_windows) {
    for (std::size_t i = pool.size() - 1; i > 0; --i) std::swap(pool[i], pool[rng.below(i + 1)]);
    pool.resize(static_cast<std::size_t>(cfg.max_windows));
  }
  nn::Adam<T> opt({cfg.step_size});
  auto params = out.model.params();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = pool.size() - 1; i > 0; --i) std::swap(pool[i], pool[rng.below(i + 1)]);
    EpochStats es;
    int batches = 0;
    for (std::size_t off = 0; off < pool.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<WindowRef> refs(pool.begin() + static_cast<std::ptrdiff_t>(off),
                                        pool.begin() + static_cast<std::ptrdiff_t>(std::min(pool.size(), off + static_cast<std::size_t>(cfg.batch_size))));
      Batch<T> b = make_batch<T>(data, refs, cfg.window, cfg.horizon);
      Mat<T> noise(cfg.latent_dim, b.size());
      for (Eigen::Index j = 0; j < noise.cols(); ++j)
        for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = static_cast<T>(rng.normal());
      if (cfg.obs_dropout > 0.0 || cfg.token_dropout > 0.0) {
        b.token_keep = Eigen::MatrixXi::Ones(cfg.horizon, b.size());
        for (int j = 0; j < b.size(); ++j) {
          if (rng.uniform() < cfg.obs_dropout) b.obs.col(j).setZero();
          for (int k = 1; k < cfg.horizon; ++k)
            if (rng.uniform() < cfg.token_dropout) b.token_keep(k, j) = 0;
        }
      }
      nn::zero_grad(params);
      const ElboResult r = elbo_loss(out.model, b, cfg.beta, noise);
      if (!std::isfinite(r.loss))
        throw TrainingError("train_vae: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + " (windows " + std::to_string(off) + ".." +
                            std::to_string(off + refs.size() - 1) + " of the shuffled pool)");
      opt.step(params);
      es.loss += r.loss;
      es.recon += r.recon;
      es.kl += r.kl;
      ++batches;
    }
    es.loss /= batches;
    es.recon /= batches;
    es.kl /= batches;
    out.curve.push_back(es);
    if (on_epoch) on_epoch(epoch, es);
  }
  return out;
}

// Checkpoint format "talents-vae" version 1.
inline constexpr int kVaeFormatVersion = 1;

template <class T>
void save_vae(const std::string& path, VaeModel<T>& m) {
  json manifest = {{"format", "talents-vae"},
                   {"version", kVaeFormatVersion},
                   {"obs_dim", m.obs_dim},
                   {"macro_vocabulary", kNumMacro},
                   {"config", m.cfg.to_json()},
                   {"config_hash", hex64(m.cfg.hash())}};
  nn::save_checkpoint(path, manifest, m.params());
}

template <class T = float>
VaeModel<T> load_vae(const std::string& path) {
  const json manifest = nn::read_manifest(path, "talents-vae", kVaeFormatVersion);
  const VaeConfig cfg = VaeConfig::from_json(manifest.at("config"));
  if (hex64(cfg.hash()) != manifest.value("config_hash", ""))
    throw FormatError("vae checkpoint " + path + ": config hash mismatch");
  if (manifest.value("macro_vocabulary", 0) != kNumMacro)
    throw FormatError("vae checkpoint " + path + ": macro vocabulary size differs");
  VaeModel<T> m;
  m.init(cfg, manifest.at("obs_dim").get<int>(), 0);
  nn::load_tensors(path, manifest, m.params());
  return m;
}

}  // namespace talents::strategy
