#pragma once

// SGD (momentum, L2 weight decay) over cross-entropy + identity loss, plus
// uniform and ensembled evaluation.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "freqmask/backbone.hpp"
#include "freqmask/disentangle.hpp"
#include "freqmask/rng.hpp"
#include "freqmask/sampler.hpp"
#include "freqmask/scene.hpp"

namespace freqmask {

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double lambda_mask = 0.1;
  bool normalize_mask = true;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  std::size_t segments = 8;  // frames per clip
  std::size_t uniform_offset = 0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(lr >= 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0) || !(lambda_mask >= 0.0)) {
      throw ConfigError("training rates must be non-negative");
    }
    if (batch_size == 0 || segments == 0) throw ConfigError("batch_size and T must be >= 1");
  }

  LossConfig loss() const { return {lambda_mask, normalize_mask, false}; }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double cross_entropy = 0.0;
  double mask_loss = 0.0;
  double eval_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochMetrics> epochs;
};

// Stacks the given frames of a [N, C, H, W] video into a clip.
inline Tensor gather_frames(const Tensor& video, const std::vector<std::size_t>& idx) {
  const Shape& d = video.dims();
  if (d.size() != 4) throw ShapeError("video must be [N,C,H,W], got " + to_string(d));
  const std::size_t frame = d[1] * d[2] * d[3];
  Tensor clip(Shape{idx.size(), d[1], d[2], d[3]});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= d[0]) throw IndexError("frame " + std::to_string(idx[i]) + " out of range");
    std::copy_n(video.values().begin() + static_cast<long>(idx[i] * frame), frame,
                clip.values().begin() + static_cast<long>(i * frame));
  }
  return clip;
}

inline Tensor uniform_clip(const Tensor& video, std::size_t segments, std::size_t offset = 0) {
  return gather_frames(video, uniform_sample(static_cast<long>(video.dims()[0]),
                                             static_cast<long>(segments),
                                             static_cast<long>(offset)));
}

inline std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

inline double accuracy(const ToyBackbone& net, const std::vector<Sample>& samples,
                       std::size_t segments, std::size_t offset = 0) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (argmax(net.predict(uniform_clip(s.video, segments, offset))) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// Frame indices chosen by the sampler from level-1 features of the whole video.
inline std::vector<std::size_t> sampled_frames(const ToyBackbone& net, const Tensor& video,
                                               std::size_t segments, std::size_t offset,
                                               const SamplerOptions& opt) {
  Tape tape;
  const auto params = net.bind_constant(tape);
  const Tensor feats = net.level1(params, tape.constant(video)).value();
  const Shape& d = feats.dims();
  const std::size_t frame = d[1] * d[2] * d[3];
  std::vector<Tensor> frames;
  frames.reserve(d[0]);
  for (std::size_t t = 0; t < d[0]; ++t) {
    Tensor f(Shape{d[1], d[2], d[3]});
    std::copy_n(feats.values().begin() + static_cast<long>(t * frame), frame, f.values().begin());
    frames.push_back(std::move(f));
  }
  return select_frames(VideoSegments(std::move(frames), segments, offset), opt);
}

struct EnsembleAccuracy {
  double uniform = 0.0;
  double ensemble = 0.0;
};

// Sums predictions on uniform frames and on sampler-selected frames.
inline EnsembleAccuracy ensemble_accuracy(const ToyBackbone& net, const std::vector<Sample>& samples,
                                          std::size_t segments, std::size_t offset,
                                          const SamplerOptions& opt, bool sum_logits = false) {
  EnsembleAccuracy acc;
  if (samples.empty()) return acc;
  std::size_t cu = 0;
  std::size_t ce = 0;
  for (const auto& s : samples) {
    const Tensor pu = net.predict(uniform_clip(s.video, segments, offset));
    const Tensor ps = net.predict(gather_frames(s.video, sampled_frames(net, s.video, segments, offset, opt)));
    if (argmax(pu) == s.label) ++cu;
    const std::size_t pred =
        sum_logits ? ensemble(ops::map(pu, [](double p) { return std::log(p); }),
                              ops::map(ps, [](double p) { return std::log(p); }))
                   : ensemble(pu, ps);
    if (pred == s.label) ++ce;
  }
  const double n = static_cast<double>(samples.size());
  acc.uniform = static_cast<double>(cu) / n;
  acc.ensemble = static_cast<double>(ce) / n;
  return acc;
}

inline TrainHistory train(const std::vector<Sample>& train_set, const std::vector<Sample>& eval_set,
                          ToyBackbone& net, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw ArgumentError("train: empty dataset");
  const LossConfig loss_cfg = cfg.loss();
  auto& params = net.parameters();
  std::vector<Tensor> velocity;
  for (const auto& p : params) velocity.emplace_back(p.dims(), 0.0);

  std::vector<Tensor> clips;
  clips.reserve(train_set.size());
  for (const auto& s : train_set) clips.push_back(uniform_clip(s.video, cfg.segments, cfg.uniform_offset));

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainHistory history;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double ce_sum = 0.0;
    double lm_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> grad_sum;
      for (const auto& p : params) grad_sum.emplace_back(p.dims(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        Tape tape;
        const auto vars = net.bind(tape);
        const auto taps = net.forward(vars, tape.constant(clips[idx]));
        const auto terms = total_loss_terms(taps.logits, train_set[idx].label, taps.mid,
                                            taps.penultimate, loss_cfg);
        const double total = terms.total.value()[0];
        if (!std::isfinite(total)) {
          throw TrainingDiverged("loss is not finite at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(step) + ", sample " +
                                 std::to_string(idx));
        }
        ce_sum += terms.cross_entropy.value()[0];
        lm_sum += terms.mask.value()[0];
        const Gradients grads = tape.backward(terms.total);
        for (std::size_t p = 0; p < params.size(); ++p) {
          const Tensor g = grads[vars[p]];
          for (std::size_t e = 0; e < g.size(); ++e) grad_sum[p][e] += g[e];
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = params[p];
        Tensor& v = velocity[p];
        for (std::size_t e = 0; e < w.size(); ++e) {
          const double g = grad_sum[p][e] * inv + cfg.weight_decay * w[e];
          v[e] = cfg.momentum * v[e] + g;
          w[e] -= cfg.lr * v[e];
        }
        if (!all_finite(w)) {
          throw TrainingDiverged("parameter " + std::to_string(p) + " became non-finite at epoch " +
                                 std::to_string(epoch) + ", step " + std::to_string(step));
        }
      }
    }
    const double n = static_cast<double>(train_set.size());
    history.epochs.push_back({epoch, ce_sum / n, lm_sum / n,
                              accuracy(net, eval_set, cfg.segments, cfg.uniform_offset)});
  }
  return history;
}

}  // namespace freqmask
