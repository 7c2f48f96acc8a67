#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lqgcn/affiliation.hpp"
#include "lqgcn/cover.hpp"
#include "lqgcn/features.hpp"
#include "lqgcn/graph.hpp"
#include "lqgcn/losses.hpp"
#include "lqgcn/model.hpp"
#include "lqgcn/rng.hpp"

namespace lqgcn {

struct TrainConfig {
  std::size_t k = 0;
  std::size_t hidden = 128;
  double alpha = 1.0;
  double beta = 1.0;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double dropout = 0.5;
  double threshold = 0.5;
  std::size_t max_iters = 1000;
  std::size_t patience_lq = 30;
  std::size_t patience_stop = 80;
  std::uint64_t seed = 0;
  Variant variant = Variant::main;
  OuterPropagation outer = OuterPropagation::renormalized;
  bool lq_enabled = true;
  NullModelScaling lq_scaling = NullModelScaling::newman;
  ContrastRule contrast = ContrastRule::successor;
  std::size_t bp_samples = 0;  // 0 selects the exact estimator

  void validate() const {
    auto fail = [](const std::string& m) { throw ShapeError("TrainConfig: " + m); };
    if (k == 0) fail("k must be positive");
    if (hidden == 0) fail("hidden width must be positive");
    if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold must lie in [0, 1]");
    if (!(patience_lq < patience_stop)) fail("patience_lq must be smaller than patience_stop");
    if (!(lr > 0.0)) fail("learning rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
    if (!(alpha >= 0.0 && beta >= 0.0 && weight_decay >= 0.0)) fail("loss weights must be non-negative");
    if (lq_enabled && k < 2) fail("the local-modularity loss needs k >= 2");
  }
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  DenseMatrix m_w1, v_w1, m_w2, v_w2;
  std::size_t step = 0;

  explicit AdamState(const ModelParams& p)
      : m_w1(p.w1.rows(), p.w1.cols()),
        v_w1(p.w1.rows(), p.w1.cols()),
        m_w2(p.w2.rows(), p.w2.cols()),
        v_w2(p.w2.rows(), p.w2.cols()) {}
};

namespace detail {

inline void adam_update(DenseMatrix& p, const DenseMatrix& g, DenseMatrix& m, DenseMatrix& v,
                        double lr, double bc1, double bc2) {
  if (!p.same_shape(g) || !p.same_shape(m)) shape_mismatch("adam_step", p.size(), g.size());
  auto pv = p.values();
  auto gv = g.values();
  auto mv = m.values();
  auto vv = v.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    mv[i] = AdamState::beta1 * mv[i] + (1.0 - AdamState::beta1) * gv[i];
    vv[i] = AdamState::beta2 * vv[i] + (1.0 - AdamState::beta2) * gv[i] * gv[i];
    const double mhat = mv[i] / bc1;
    const double vhat = vv[i] / bc2;
    pv[i] -= lr * mhat / (std::sqrt(vhat) + AdamState::eps);
  }
}

}  // namespace detail

/// One bias-corrected Adam update of both weight matrices.
inline void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state, double lr) {
  if (!grads.w1.all_finite() || !grads.w2.all_finite())
    throw NumericError("adam_step: non-finite gradient at step " + std::to_string(state.step + 1));
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(AdamState::beta1, t);
  const double bc2 = 1.0 - std::pow(AdamState::beta2, t);
  detail::adam_update(params.w1, grads.w1, state.m_w1, state.v_w1, lr, bc1, bc2);
  detail::adam_update(params.w2, grads.w2, state.m_w2, state.v_w2, lr, bc1, bc2);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainRecord {
  std::size_t iteration = 0;  // 1-based
  double bp = 0.0;
  std::optional<double> lq;
  double total = 0.0;
  std::size_t counter = 0;  // consecutive iterations without a new minimum
  bool lq_active = false;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  bool stopped_early = false;
};

struct TrainResult {
  AffiliationMatrix f;
  ModelParams params;
  TrainLog log;
};

/// Thrown when the loss or gradients stop being finite. Carries the last
/// parameters that produced a finite loss.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, ModelParams last_finite, TrainLog log)
      : NumericError(what), last_finite_(std::move(last_finite)), log_(std::move(log)) {}
  const ModelParams& last_finite() const noexcept { return last_finite_; }
  const TrainLog& log() const noexcept { return log_; }

 private:
  ModelParams last_finite_;
  TrainLog log_;
};

/// Minimum decrease that counts as a new best loss.
inline constexpr double kImprovementTolerance = 1e-9;

/// Full-batch training.
///
/// Each iteration runs forward -> loss -> backward -> Adam. A counter tracks
/// consecutive iterations without a new minimum of the active loss. Once it
/// exceeds patience_lq (and the local-modularity term is enabled) that term
/// joins the objective from the next iteration on; the best-loss baseline and
/// the counter restart at that point. Training stops the first time the
/// counter exceeds patience_stop. Features are row-L2-normalized here.
inline TrainResult train(const Graph& g, const FeatureMatrix& x, const TrainConfig& cfg) {
  cfg.validate();
  if (x.rows() != g.n_nodes())
    throw DataError("train: feature rows (" + std::to_string(x.rows()) + ") do not match node count (" +
                    std::to_string(g.n_nodes()) + ")");
  const FeatureMatrix xn = row_l2_normalize(x);
  const GraphOperators ops(g);
  RngStream rng(cfg.seed);

  ModelParams params = init_params(xn.cols(), cfg.hidden, cfg.k, rng);
  AdamState adam(params);
  TrainLog log;

  const ForwardOptions train_opts{cfg.variant, cfg.outer, cfg.dropout, true};
  const LqOptions lq_opts{cfg.lq_scaling, cfg.contrast};
  double best = std::numeric_limits<double>::infinity();
  std::size_t counter = 0;
  bool lq_active = false;

  for (std::size_t idx = 1; idx <= cfg.max_iters; ++idx) {
    ForwardResult fr = forward(params, ops, xn, train_opts, rng);
    const BpEstimator estimator = cfg.bp_samples == 0 ? BpEstimator{ExactEstimator{}}
                                                      : BpEstimator{SampledEstimator{cfg.bp_samples, &rng}};
    const LossWeights weights{cfg.alpha, cfg.beta, cfg.weight_decay, lq_active};
    TotalLoss loss = total_loss(fr.f, g, weights, params, estimator, lq_opts);
    if (!std::isfinite(loss.value))
      throw DivergenceError("train: non-finite loss at iteration " + std::to_string(idx), params, log);

    if (loss.value < best - kImprovementTolerance) {
      best = loss.value;
      counter = 0;
    } else {
      ++counter;
    }
    log.records.push_back({idx, loss.bp, loss.lq, loss.value, counter, lq_active});

    if (counter > cfg.patience_stop) {
      log.stopped_early = true;
      break;
    }
    if (cfg.lq_enabled && !lq_active && counter > cfg.patience_lq) {
      lq_active = true;
      best = std::numeric_limits<double>::infinity();
      counter = 0;
    }

    ParamGrads grads = backward(params, fr.cache, loss.grad_f, ops);
    grads.w1 += loss.grad_reg.w1;
    grads.w2 += loss.grad_reg.w2;
    if (!grads.w1.all_finite() || !grads.w2.all_finite())
      throw DivergenceError("train: non-finite gradient at iteration " + std::to_string(idx), params, log);
    adam_step(params, grads, adam, cfg.lr);
  }

  const ForwardOptions infer_opts{cfg.variant, cfg.outer, 0.0, false};
  AffiliationMatrix f = forward(params, ops, xn, infer_opts, rng).f;
  return {std::move(f), std::move(params), std::move(log)};
}

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

/// column_max divides each column by its maximum (zero columns untouched)
/// before comparing with p; raw compares F directly.
enum class ThresholdMode { column_max, raw };

inline DenseMatrix rescale_columns(const DenseMatrix& f) {
  DenseMatrix out = f;
  for (std::size_t c = 0; c < f.cols(); ++c) {
    double mx = 0.0;
    for (std::size_t i = 0; i < f.rows(); ++i) mx = std::max(mx, f(i, c));
    if (mx > 0.0)
      for (std::size_t i = 0; i < f.rows(); ++i) out(i, c) = f(i, c) / mx;
  }
  return out;
}

inline Cover threshold_assign(const AffiliationMatrix& f, double p,
                              ThresholdMode mode = ThresholdMode::column_max) {
  if (!(p >= 0.0 && p <= 1.0)) throw ShapeError("threshold_assign: p must lie in [0, 1]");
  const DenseMatrix scaled = mode == ThresholdMode::column_max ? rescale_columns(f.matrix()) : f.matrix();
  std::vector<Community> comms(f.n_communities());
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (std::size_t c = 0; c < scaled.cols(); ++c)
      if (scaled(i, c) > p) comms[c].push_back(static_cast<Index>(i));
  return Cover(f.n_nodes(), std::move(comms));
}

inline std::vector<std::pair<double, Cover>> threshold_sweep(const AffiliationMatrix& f,
                                                             const std::vector<double>& ps,
                                                             ThresholdMode mode = ThresholdMode::column_max) {
  if (ps.empty()) throw ShapeError("threshold_sweep: empty threshold list");
  std::vector<std::pair<double, Cover>> out;
  out.reserve(ps.size());
  for (double p : ps) out.emplace_back(p, threshold_assign(f, p, mode));
  return out;
}

}  // namespace lqgcn
