#pragma once

// Learned bundle solver. Each iteration turns hand-made features of the
// current bundle into an LSTM step, decodes a query, a key for the newest
// entry and a step size, attends over all keys to get convex weights, and
// takes a step from a softly updated center. Everything from the parameters
// to the oracle values is recorded on an autodiff tape so the whole unrolled
// run can be trained.

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "json.hpp"
#include "bnet/autodiff.hpp"
#include "bnet/bundle_core.hpp"
#include "bnet/bundle_solver.hpp"
#include "bnet/oracles.hpp"

namespace bnet {

inline constexpr std::size_t kFeatureCount = 29;
inline constexpr double kBigEta = 1e4;

enum class Psi { Softmax, Sparsemax };

inline const char* to_string(Psi p) { return p == Psi::Softmax ? "softmax" : "sparsemax"; }

inline Psi psi_from_string(std::string_view s) {
  if (s == "softmax") return Psi::Softmax;
  if (s == "sparsemax") return Psi::Sparsemax;
  throw ContractViolation("unknown normalization '" + std::string(s) + "'");
}

/// Network sizes. The LSTM hidden state holds six latent chunks; decoder
/// hidden layers are `decoder_mult` latents wide.
struct NetConfig {
  std::size_t latent = 128;
  std::size_t decoder_mult = 8;

  std::size_t lstm_hidden() const { return 6 * latent; }
  std::size_t decoder_hidden() const { return decoder_mult * latent; }
  void validate() const {
    require(latent >= 1, "NetConfig: latent size must be positive");
    require(decoder_mult >= 1, "NetConfig: decoder multiplier must be positive");
  }
  bool operator==(const NetConfig&) const = default;
};

namespace net_detail {

enum Slot : std::size_t {
  kLstmW, kLstmB,
  kQW1, kQB1, kQW2, kQB2,
  kKW1, kKB1, kKW2, kKB2,
  kEtaW1, kEtaB1, kEtaW2, kEtaB2,
  kSlotCount
};

inline ad::TensorList layout(const NetConfig& c) {
  const std::size_t H = c.lstm_hidden(), L = c.latent, D = c.decoder_hidden();
  auto t = [](const char* name, std::size_t r, std::size_t k) {
    return ad::Tensor{name, r, k, Vec(r * k, 0.0)};
  };
  return {t("lstm.weight", 4 * H, kFeatureCount + H), t("lstm.bias", 4 * H, 1),
          t("q.w1", D, L), t("q.b1", D, 1), t("q.w2", L, D), t("q.b2", L, 1),
          t("k.w1", D, L), t("k.b1", D, 1), t("k.w2", L, D), t("k.b2", L, 1),
          t("eta.w1", D, L), t("eta.b1", D, 1), t("eta.w2", 1, D), t("eta.b2", 1, 1)};
}

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace net_detail

/// All trainable tensors, in a fixed order with stable names.
struct NetParams {
  NetConfig config;
  ad::TensorList tensors;

  static NetParams zeros(const NetConfig& c) {
    c.validate();
    return {c, net_detail::layout(c)};
  }

  /// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static NetParams init(const NetConfig& c, std::uint64_t seed) {
    NetParams p = zeros(c);
    std::mt19937_64 rng(seed);
    for (auto& t : p.tensors) {
      if (t.cols == 1) continue;  // bias
      const double a = 1.0 / std::sqrt(static_cast<double>(t.cols));
      std::uniform_real_distribution<double> u(-a, a);
      for (double& v : t.data) v = u(rng);
    }
    return p;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  const ad::Tensor& operator[](std::string_view name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw ContractViolation("NetParams: no tensor named '" + std::string(name) + "'");
  }
};

/// Parameters bound to one tape. With a gradient list, backward accumulates
/// into it; without one they are constants.
struct BoundNet {
  NetConfig config;
  std::vector<ad::Value> p;
};

inline BoundNet bind(ad::Tape& tape, const NetParams& params, ad::TensorList* grads = nullptr) {
  require(params.tensors.size() == net_detail::kSlotCount, "bind: unexpected tensor count");
  require(!grads || grads->size() == params.tensors.size(), "bind: gradient list mismatch");
  BoundNet b{params.config, {}};
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& t = params.tensors[i];
    std::span<double> sink;
    if (grads) {
      require((*grads)[i].size() == t.size(), "bind: gradient shape mismatch for " + t.name);
      sink = (*grads)[i].data;
    }
    b.p.push_back(tape.parameter(t.data, sink, t.rows, t.cols));
  }
  return b;
}

/// The tape keeps views into the tensors, so they must outlive it.
BoundNet bind(ad::Tape&, NetParams&&, ad::TensorList* = nullptr) = delete;

// ---------------------------------------------------------------------------
// Network pieces

struct LstmState {
  ad::Value h, c;
};

inline LstmState zero_lstm_state(ad::Tape& tape, const NetConfig& c) {
  return {tape.constant(Vec(c.lstm_hidden(), 0.0)), tape.constant(Vec(c.lstm_hidden(), 0.0))};
}

/// Latent chunks in order: query mean, query spread, key mean, key spread,
/// step mean, step spread.
using Chunks = std::array<ad::Value, 6>;

/// One LSTM cell step (gate order i, f, g, o) whose hidden output is split
/// into the six chunks.
inline std::pair<Chunks, LstmState> encode_step(const BoundNet& net, ad::Value features,
                                                const LstmState& state) {
  using namespace net_detail;
  require(features.size() == kFeatureCount, "encode_step: expected 29 features");
  const std::size_t H = net.config.lstm_hidden(), L = net.config.latent;
  const ad::Value gates =
      ad::add(ad::matvec(net.p[kLstmW], ad::concat({features, state.h})), net.p[kLstmB]);
  const ad::Value i = ad::sigmoid(ad::slice(gates, 0, H));
  const ad::Value f = ad::sigmoid(ad::slice(gates, H, H));
  const ad::Value g = ad::tanh(ad::slice(gates, 2 * H, H));
  const ad::Value o = ad::sigmoid(ad::slice(gates, 3 * H, H));
  const ad::Value c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
  const ad::Value h = ad::mul(o, ad::tanh(c));
  Chunks chunks;
  for (std::size_t k = 0; k < 6; ++k) chunks[k] = ad::slice(h, k * L, L);
  return {chunks, {h, c}};
}

struct Latents {
  ad::Value q, k, eta;
};

/// Mean mode when `eps` is empty; otherwise h = mu + softplus(s) * eps with
/// eps laid out as [query | key | step].
inline Latents sample_latents(const Chunks& c, std::span<const double> eps = {}) {
  if (eps.empty()) return {c[0], c[2], c[4]};
  const std::size_t L = c[0].size();
  require(eps.size() == 3 * L, "sample_latents: noise must hold three latents");
  auto draw = [&](std::size_t k) {
    return ad::gaussian_reparam(c[2 * k], ad::softplus(c[2 * k + 1]), eps.subspan(k * L, L));
  };
  return {draw(0), draw(1), draw(2)};
}

struct Decoded {
  ad::Value q, k, eta;
};

inline Decoded decode(const BoundNet& net, const Latents& h) {
  using namespace net_detail;
  auto mlp = [&](std::size_t w1, ad::Value x) {
    const ad::Value hidden = ad::relu(ad::add(ad::matvec(net.p[w1], x), net.p[w1 + 1]));
    return ad::add(ad::matvec(net.p[w1 + 2], hidden), net.p[w1 + 3]);
  };
  return {mlp(kQW1, h.q), mlp(kKW1, h.k), ad::softplus(mlp(kEtaW1, h.eta))};
}

/// delta_i = k_i^T q.
inline ad::Value attention_scores(ad::Value q, const std::vector<ad::Value>& keys) {
  require(!keys.empty(), "attention_scores: no keys");
  std::vector<ad::Value> d;
  d.reserve(keys.size());
  for (const auto& k : keys) d.push_back(ad::dot(k, q));
  return ad::concat(d);
}

inline ad::Value normalize(ad::Value delta, Psi psi) {
  return psi == Psi::Softmax ? ad::softmax(delta) : ad::sparsemax(delta);
}

struct SoftCenter {
  ad::Value center, value;
};

/// r = softmin(phi_new, v_bar); both the center and its surrogate value move
/// to the r-weighted combination.
inline SoftCenter soft_center_update(ad::Value pi_new, ad::Value phi_new, ad::Value center,
                                     ad::Value center_value) {
  const ad::Value r = ad::softmin(ad::concat({phi_new, center_value}));
  const ad::Value r1 = ad::slice(r, 0, 1), r2 = ad::slice(r, 1, 1);
  return {ad::add(ad::scale(r1, pi_new), ad::scale(r2, center)),
          ad::add(ad::mul(r1, phi_new), ad::mul(r2, center_value))};
}

/// gamma-discounted sum: sum_t gamma^(T-t) phi_t.
inline ad::Value discounted_loss(const std::vector<ad::Value>& trajectory, double gamma) {
  require(!trajectory.empty(), "loss: empty trajectory");
  require(gamma > 0.0 && gamma <= 1.0, "loss: gamma must be in (0, 1]");
  const std::size_t T = trajectory.size();
  Vec w(T);
  for (std::size_t t = 0; t < T; ++t) w[t] = std::pow(gamma, static_cast<double>(T - 1 - t));
  ad::Tape& tape = trajectory.front().tape();
  return ad::dot(ad::concat(trajectory), tape.constant(std::move(w)));
}

// ---------------------------------------------------------------------------
// Rollout

struct RolloutState {
  BundleState bundle;  // numeric mirror; center and value track the soft center
  std::vector<ad::Value> keys;
  LstmState lstm;
  Vec prev_theta{1.0};
  Vec prev_w;
  double prev_eta = 1.0;
  double prev_sigma = 0.0;
  ad::Value center, center_value;
  std::size_t t = 1;
  std::vector<ad::Value> trajectory;
};

/// The 29 input features describing the newest entry and the previous step.
inline Vec extract_features(const RolloutState& s) {
  const auto& entries = s.bundle.entries();
  require(!entries.empty(), "extract_features: empty bundle");
  const BundleEntry& last = entries.back();
  const Vec& g = last.g;
  const Vec& pi = last.point;

  // Lowest linearization error, ties resolved toward the newest entry.
  std::size_t best = 0;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].alpha <= entries[best].alpha) best = i;

  auto stats = [](const Vec& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0, lo = v.empty() ? 0.0 : v[0], hi = lo;
    for (double x : v) mean += x, lo = std::min(lo, x), hi = std::max(hi, x);
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::array<double, 4>{mean, var / n, lo, hi};
  };
  double gg_lo = 1e300, gg_hi = -1e300, pp_lo = 1e300, pp_hi = -1e300;
  for (const auto& e : entries) {
    const double gg = dot(g, e.g), pp = dot(pi, e.point);
    gg_lo = std::min(gg_lo, gg), gg_hi = std::max(gg_hi, gg);
    pp_lo = std::min(pp_lo, pp), pp_hi = std::max(pp_hi, pp);
  }
  const double w2 = squared_norm(s.prev_w);
  const auto gs = stats(g), ps = stats(pi);
  return {s.prev_eta,
          w2,
          s.prev_eta * w2,
          s.prev_sigma,
          w2 > s.prev_sigma ? 1.0 : 0.0,
          kBigEta * w2 > s.prev_sigma ? 1.0 : 0.0,
          static_cast<double>(s.t),
          last.value,
          s.bundle.center_value(),
          entries[best].alpha,
          last.alpha,
          norm(pi),
          norm(s.bundle.center()),
          norm(entries[best].g),
          squared_norm(g),
          gs[0], gs[1], gs[2], gs[3],
          squared_norm(pi),
          ps[0], ps[1], ps[2], ps[3],
          gg_lo, gg_hi, pp_lo, pp_hi,
          dot(g, s.prev_w)};
}

struct RolloutOptions {
  std::size_t iterations = 10;
  Psi psi = Psi::Softmax;
  bool sample = false;
  std::uint64_t noise_seed = 0;
  bool record_times = true;
};

/// What a run saw: features and attention weights per step, subgradients
/// per oracle call.
struct RolloutRecording {
  std::vector<Vec> features;
  std::vector<Vec> weights;
  std::vector<Vec> subgradients;
};

/// Test instrumentation. Defaults leave the rollout untouched.
struct RolloutHooks {
  std::optional<double> fixed_eta;
  bool one_hot_newest = false;
  bool center_follows_trial = false;
  double oracle_slope_scale = 1.0;
  /// Replays recorded features and subgradients so that finite differences
  /// see the same non-differentiated inputs as the tape.
  const RolloutRecording* replay = nullptr;
  RolloutRecording* record = nullptr;
};

struct RolloutResult {
  std::vector<ad::Value> trajectory;
  Trace trace;
};

/// Unrolls `options.iterations` steps from pi0: one initial oracle call plus
/// one per step. Oracle values enter the tape as linearized nodes.
inline RolloutResult rollout(ad::Tape& tape, const BoundNet& net, const OracleHandle& oracle,
                             std::span<const double> pi0, const RolloutOptions& options,
                             const RolloutHooks& hooks = {}) {
  require(options.iterations >= 1, "rollout: need at least one iteration");
  detail::check_start(oracle, pi0);
  const detail::Stopwatch clock(options.record_times);
  const std::size_t L = net.config.latent;
  RolloutResult out;
  Trace& trace = out.trace;

  auto subgradient_for = [&](std::size_t call, Vec fresh) {
    if (hooks.record) hooks.record->subgradients.push_back(fresh);
    if (hooks.replay) {
      require(call < hooks.replay->subgradients.size(), "rollout: replay is too short");
      return hooks.replay->subgradients[call];
    }
    return fresh;
  };

  Vec start(pi0.begin(), pi0.end());
  Evaluation e0 = detail::counted_call(oracle, start, trace);
  trace.record({0, e0.value, e0.value, e0.raw_lr_value, 0.0, StepType::None, clock.seconds()},
               start);

  RolloutState s;
  s.bundle = BundleState(start, e0.value);
  s.bundle.append({subgradient_for(0, e0.subgradient), 0.0, e0.value, start, 0, 0});
  s.prev_w = s.bundle.entries()[0].g;
  s.lstm = zero_lstm_state(tape, net.config);
  s.center = tape.constant(start);
  s.center_value = tape.scalar(e0.value);

  std::optional<std::mt19937_64> rng;
  if (options.sample) rng.emplace(options.noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (; s.t <= options.iterations; ++s.t) {
    Vec feats = extract_features(s);
    if (hooks.record) hooks.record->features.push_back(feats);
    if (hooks.replay) {
      require(s.t - 1 < hooks.replay->features.size(), "rollout: replay is too short");
      feats = hooks.replay->features[s.t - 1];
    }
    auto [chunks, lstm] = encode_step(net, tape.constant(std::move(feats)), s.lstm);
    s.lstm = lstm;
    Vec eps;
    if (rng) {
      eps.resize(3 * L);
      for (double& v : eps) v = normal(*rng);
    }
    const Decoded d = decode(net, sample_latents(chunks, eps));
    s.keys.push_back(d.k);

    const auto& entries = s.bundle.entries();
    const std::size_t n = entries.size(), dim = s.bundle.dimension();
    ad::Value theta;
    if (hooks.one_hot_newest) {
      Vec one(n, 0.0);
      one.back() = 1.0;
      theta = tape.constant(std::move(one));
    } else {
      theta = normalize(attention_scores(d.q, s.keys), options.psi);
    }
    // w = G theta with the subgradients as constant columns.
    Vec G(dim * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < dim; ++i) G[i * n + j] = entries[j].g[i];
    const ad::Value w = ad::matvec(tape.constant(std::move(G), dim, n), theta);
    const ad::Value eta = hooks.fixed_eta ? tape.scalar(*hooks.fixed_eta) : d.eta;

    ad::Value trial = ad::sub(s.center, ad::scale(eta, w));
    if (oracle.sign_constrained()) trial = ad::relu(trial);
    const Vec point(trial.data().begin(), trial.data().end());
    Evaluation e = detail::counted_call(oracle, point, trace);
    Vec slope = e.subgradient;
    for (double& v : slope) v *= hooks.oracle_slope_scale;
    const ad::Value phi = ad::linearized(trial, e.value, slope);
    s.trajectory.push_back(phi);

    // Previous-step quantities for the next feature vector.
    const auto th = theta.data();
    s.prev_theta.assign(th.begin(), th.end());
    if (hooks.record) hooks.record->weights.push_back(s.prev_theta);
    s.prev_w.assign(w.data().begin(), w.data().end());
    s.prev_eta = eta.item();
    s.prev_sigma = 0.0;
    for (std::size_t j = 0; j < n; ++j) s.prev_sigma += th[j] * entries[j].alpha;

    BundleEntry entry{subgradient_for(s.t, e.subgradient), 0.0, e.value, point, s.t, s.t};
    entry.alpha = linearization_error(entry, s.bundle.center(), s.bundle.center_value());
    s.bundle.append(std::move(entry));

    if (hooks.center_follows_trial) {
      s.center = trial;
      s.center_value = phi;
    } else {
      const SoftCenter c = soft_center_update(trial, phi, s.center, s.center_value);
      s.center = c.center;
      s.center_value = c.value;
    }
    s.bundle.translate_errors(s.center.data(), s.center_value.item());

    trace.record({s.t, e.value, s.center_value.item(), e.raw_lr_value, s.prev_eta,
                  StepType::None, clock.seconds()},
                 point);
  }
  out.trajectory = std::move(s.trajectory);
  return out;
}

/// Mean-mode inference run with no gradient bookkeeping.
inline Trace evaluate_network(const NetParams& params, const OracleHandle& oracle,
                              std::span<const double> pi0, std::size_t budget,
                              Psi psi = Psi::Softmax, bool record_times = true) {
  ad::Tape tape;
  const BoundNet net = bind(tape, params);
  RolloutOptions opt;
  opt.iterations = budget;
  opt.psi = psi;
  opt.record_times = record_times;
  return rollout(tape, net, oracle, pi0, opt).trace;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t iterations = 10;
  double gamma = 0.999;
  double lr = 1e-5;
  double clip = 5.0;
  double lr_decay = 0.9;
  std::size_t epochs = 25;
  bool sample_latents = false;
  Psi psi = Psi::Softmax;
  std::uint64_t seed = 0;

  void validate() const {
    require(iterations >= 1, "TrainConfig: iterations must be >= 1");
    require(gamma > 0.0 && gamma <= 1.0, "TrainConfig: gamma must be in (0, 1]");
    require(lr > 0.0, "TrainConfig: lr must be positive");
    require(clip > 0.0, "TrainConfig: clip must be positive");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "TrainConfig: lr_decay must be in (0, 1]");
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  }
};

struct TrainLogRow {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double wall_time_s = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::vector<TrainLogRow> log)
      : std::runtime_error(what), log_(std::move(log)) {}
  const std::vector<TrainLogRow>& log() const { return log_; }

 private:
  std::vector<TrainLogRow> log_;
};

struct TrainResult {
  NetParams params;
  std::vector<TrainLogRow> log;
};

/// Noise seed for one (epoch, instance) rollout.
inline std::uint64_t rollout_seed(std::uint64_t seed, std::size_t epoch, std::size_t instance) {
  return net_detail::mix(net_detail::mix(net_detail::mix(seed) ^ epoch) ^ instance);
}

/// Loss and parameter gradients of one training rollout from pi = 0.
inline double loss_and_gradient(const NetParams& params, const OracleHandle& oracle,
                                const RolloutOptions& opt, double gamma, ad::TensorList& grads,
                                const RolloutHooks& hooks = {}) {
  for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
  ad::Tape tape;
  const BoundNet net = bind(tape, params, &grads);
  const Vec pi0(oracle.dimension(), 0.0);
  const auto r = rollout(tape, net, oracle, pi0, opt, hooks);
  const ad::Value loss = discounted_loss(r.trajectory, gamma);
  if (std::isfinite(loss.item())) tape.backward(loss);
  return loss.item();
}

/// Adam over every instance of every epoch in a fixed order, with clipped
/// gradients and a learning rate decayed per epoch.
inline TrainResult train(NetParams params, const std::vector<OracleHandle>& instances,
                         const TrainConfig& config, bool record_times = true,
                         const std::function<void(const TrainLogRow&)>& on_epoch = {}) {
  config.validate();
  require(!instances.empty(), "train: empty dataset");
  TrainResult result{std::move(params), {}};
  ad::TensorList grads = ad::zeros_like(result.params.tensors);
  ad::AdamState adam;
  const detail::Stopwatch clock(record_times);
  RolloutOptions opt;
  opt.iterations = config.iterations;
  opt.psi = config.psi;
  opt.sample = config.sample_latents;
  opt.record_times = false;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr * std::pow(config.lr_decay, static_cast<double>(epoch));
    double total = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      opt.noise_seed = rollout_seed(config.seed, epoch, i);
      const double loss =
          loss_and_gradient(result.params, instances[i], opt, config.gamma, grads);
      if (!std::isfinite(loss) || !std::isfinite(ad::global_norm(grads)))
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) +
                                   ", instance " + std::to_string(i),
                               result.log);
      total += loss;
      ad::clip_global_norm(grads, config.clip);
      ad::adam_param_update(result.params.tensors, grads, adam, lr);
    }
    result.log.push_back({epoch + 1, total / static_cast<double>(instances.size()),
                          clock.seconds()});
    if (on_epoch) on_epoch(result.log.back());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: "bnet-ckpt-v1\n", u64 header length, JSON header, raw doubles.

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCheckpointMagic = "bnet-ckpt-v1\n";

inline void save_checkpoint(const std::string& path, const NetParams& params,
                            const nlohmann::json& echo = nlohmann::json::object()) {
  static_assert(std::endian::native == std::endian::little, "checkpoints assume little endian");
  nlohmann::json header;
  header["format"] = "bnet-ckpt-v1";
  header["config"] = {{"latent", params.config.latent},
                      {"decoder_mult", params.config.decoder_mult}};
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : params.tensors)
    header["tensors"].push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  header["echo"] = echo;
  const std::string text = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot write checkpoint " + path);
  const std::uint64_t len = text.size();
  f.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  f.write(reinterpret_cast<const char*>(&len), sizeof len);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : params.tensors)
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!f) throw CheckpointError("failed writing checkpoint " + path);
}

inline NetParams load_checkpoint(const std::string& path, nlohmann::json* echo = nullptr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path);
  std::string magic(kCheckpointMagic.size(), '\0');
  f.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!f || magic != kCheckpointMagic) throw CheckpointError(path + ": not a bnet-ckpt-v1 file");
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!f || len > (1u << 26)) throw CheckpointError(path + ": corrupt header length");
  std::string text(len, '\0');
  f.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(path + ": bad header: " + e.what());
  }
  NetConfig cfg;
  try {
    cfg.latent = header.at("config").at("latent").get<std::size_t>();
    cfg.decoder_mult = header.at("config").at("decoder_mult").get<std::size_t>();
    cfg.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(path + ": bad config: " + e.what());
  }
  NetParams p = NetParams::zeros(cfg);
  const auto& listed = header.at("tensors");
  if (!listed.is_array() || listed.size() != p.tensors.size())
    throw CheckpointError(path + ": tensor list does not match the network layout");
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    auto& t = p.tensors[i];
    if (listed[i].value("name", "") != t.name || listed[i].value("rows", 0u) != t.rows ||
        listed[i].value("cols", 0u) != t.cols)
      throw CheckpointError(path + ": tensor " + std::to_string(i) + " does not match " + t.name);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!f) throw CheckpointError(path + ": truncated data for " + t.name);
  }
  if (f.peek() != std::char_traits<char>::eof())
    throw CheckpointError(path + ": trailing bytes after tensor data");
  if (echo) *echo = header.value("echo", nlohmann::json::object());
  return p;
}

}  // namespace bnet
