#pragma once

// Frame sampling over T uniform segments of s frames each.
//
// For candidate frame j of segment i (both 1-based), with masked features
// y = M * x and uniform frames u_k of every other segment:
//   C_p = sum_{k=1}^{i-1} (T-i+k)/T * msd(y_{i,j}, u_k)
//   C_f = sum_{k=i+1}^{T} (T+i-k)/T * msd(y_{i,j}, u_k)
//   net = w_p C_p + w_f C_f,  w_p = C_p/(C_p+C_f) i,  w_f = C_f/(C_p+C_f) (T-i)
// where msd is the mean of elementwise squared differences. The strict
// weight variant uses C_p in the numerator of w_f as well.

#include <string>
#include <vector>

#include "freqmask/masks.hpp"
#include "freqmask/tensor.hpp"

namespace freqmask {

inline std::vector<std::size_t> uniform_sample(long num_frames, long segments, long offset) {
  if (segments < 1) throw ArgumentError("uniform_sample: T must be >= 1");
  if (segments > num_frames) {
    throw ArgumentError("uniform_sample: T=" + std::to_string(segments) + " exceeds " +
                        std::to_string(num_frames) + " frames");
  }
  const long s = num_frames / segments;
  if (offset < 0 || offset >= s) {
    throw ArgumentError("uniform_sample: offset " + std::to_string(offset) +
                        " outside segment of " + std::to_string(s) + " frames");
  }
  std::vector<std::size_t> idx(static_cast<std::size_t>(segments));
  for (long i = 0; i < segments; ++i) idx[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i * s + offset);
  return idx;
}

// Per-frame features grouped into T segments of s frames. Frames past T*s
// are dropped.
class VideoSegments {
 public:
  VideoSegments(std::vector<Tensor> frames, std::size_t segments, std::size_t uniform_offset = 0)
      : segments_(segments), uniform_offset_(uniform_offset) {
    if (segments == 0) throw ArgumentError("VideoSegments: T must be >= 1");
    if (frames.size() < segments) {
      throw ArgumentError("VideoSegments: " + std::to_string(frames.size()) +
                          " frames cannot fill " + std::to_string(segments) + " segments");
    }
    per_segment_ = frames.size() / segments;
    if (uniform_offset >= per_segment_) {
      throw ArgumentError("VideoSegments: uniform offset must be < frames per segment");
    }
    frames.resize(segments * per_segment_);
    for (const auto& f : frames) {
      if (f.dims() != frames.front().dims()) {
        throw ShapeError("VideoSegments: frame shapes differ: " + to_string(f.dims()) + " vs " +
                         to_string(frames.front().dims()));
      }
    }
    frames_ = std::move(frames);
  }

  std::size_t segments() const noexcept { return segments_; }
  std::size_t frames_per_segment() const noexcept { return per_segment_; }
  std::size_t uniform_offset() const noexcept { return uniform_offset_; }
  const std::vector<Tensor>& frames() const noexcept { return frames_; }

  // 1-based segment and candidate indices.
  std::size_t global_index(std::size_t i, std::size_t j) const {
    check(i, j);
    return (i - 1) * per_segment_ + (j - 1);
  }
  const Tensor& frame(std::size_t i, std::size_t j) const { return frames_[global_index(i, j)]; }
  const Tensor& uniform_frame(std::size_t i) const { return frame(i, uniform_offset_ + 1); }

  // Uniform frames stacked to [T, ...frame dims].
  Tensor uniform_volume() const {
    const Shape& fd = frames_.front().dims();
    Shape dims{segments_};
    dims.insert(dims.end(), fd.begin(), fd.end());
    Tensor vol(dims);
    const std::size_t n = frames_.front().size();
    for (std::size_t i = 1; i <= segments_; ++i) {
      const Tensor& f = uniform_frame(i);
      std::copy(f.values().begin(), f.values().end(), vol.values().begin() + static_cast<long>((i - 1) * n));
    }
    return vol;
  }

  void check(std::size_t i, std::size_t j) const {
    if (i < 1 || i > segments_) {
      throw ArgumentError("segment index " + std::to_string(i) + " outside 1.." +
                          std::to_string(segments_));
    }
    if (j < 1 || j > per_segment_) {
      throw ArgumentError("frame index " + std::to_string(j) + " outside 1.." +
                          std::to_string(per_segment_));
    }
  }

 private:
  std::size_t segments_;
  std::size_t per_segment_ = 0;
  std::size_t uniform_offset_;
  std::vector<Tensor> frames_;
};

struct SegmentCosts {
  double prior = 0.0;
  double future = 0.0;
  double w_prior = 0.0;
  double w_future = 0.0;
  double net = 0.0;
};

enum class SelectionMode { Argmax, Argmin };

struct SamplerOptions {
  SelectionMode mode = SelectionMode::Argmax;
  bool strict_paper_weights = false;
  bool normalize_mask = true;
};

// One combined mask per video, from the uniform-frame volume.
inline SaliencyMap sampling_mask(const VideoSegments& seg, bool normalize = true) {
  Tensor vol = seg.uniform_volume();
  if (vol.rank() == 3) vol = vol.reshaped({vol.dims()[0], 1, vol.dims()[1], vol.dims()[2]});
  SaliencyMap m = combined_mask(vol, normalize);
  if (seg.frames().front().rank() == 2) m.values = m.values.reshaped(seg.frames().front().dims());
  return m;
}

inline double mean_squared_difference(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw ShapeError("mean_squared_difference: " + to_string(a.dims()) + " vs " +
                     to_string(b.dims()));
  }
  double s = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    const double d = a[e] - b[e];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// Fills the weights and net cost of `entry` for segment i of T.
inline double net_cost(SegmentCosts& entry, std::size_t i, std::size_t segments,
                       bool strict_paper_weights = false) {
  const double total = entry.prior + entry.future;
  if (total == 0.0) {
    entry.w_prior = entry.w_future = entry.net = 0.0;
    return 0.0;
  }
  const double ti = static_cast<double>(i);
  const double rest = static_cast<double>(segments) - ti;
  entry.w_prior = entry.prior / total * ti;
  entry.w_future = (strict_paper_weights ? entry.prior : entry.future) / total * rest;
  entry.net = entry.w_prior * entry.prior + entry.w_future * entry.future;
  return entry.net;
}

namespace detail {

inline SegmentCosts costs_from_masked(const std::vector<Tensor>& uniform_masked,
                                      const Tensor& candidate, std::size_t i, bool strict) {
  const std::size_t t = uniform_masked.size();
  const double td = static_cast<double>(t);
  SegmentCosts c;
  for (std::size_t k = 1; k < i; ++k) {
    c.prior += static_cast<double>(t - i + k) / td *
               mean_squared_difference(candidate, uniform_masked[k - 1]);
  }
  for (std::size_t k = i + 1; k <= t; ++k) {
    c.future += static_cast<double>(t + i - k) / td *
                mean_squared_difference(candidate, uniform_masked[k - 1]);
  }
  net_cost(c, i, t, strict);
  return c;
}

inline std::vector<Tensor> masked_uniform_frames(const VideoSegments& seg, const SaliencyMap& m) {
  std::vector<Tensor> out;
  out.reserve(seg.segments());
  for (std::size_t k = 1; k <= seg.segments(); ++k) out.push_back(apply_mask(m, seg.uniform_frame(k)));
  return out;
}

}  // namespace detail

// Costs for candidate j of segment i (1-based).
inline SegmentCosts segment_costs(const VideoSegments& seg, const SaliencyMap& m, std::size_t i,
                                  std::size_t j, bool strict_paper_weights = false) {
  seg.check(i, j);
  return detail::costs_from_masked(detail::masked_uniform_frames(seg, m),
                                   apply_mask(m, seg.frame(i, j)), i, strict_paper_weights);
}

// One 0-based global frame index per segment; ties break to the smallest j.
inline std::vector<std::size_t> select_frames(const VideoSegments& seg, const SaliencyMap& m,
                                              const SamplerOptions& opt = {}) {
  const auto uniform = detail::masked_uniform_frames(seg, m);
  std::vector<std::size_t> picks;
  picks.reserve(seg.segments());
  for (std::size_t i = 1; i <= seg.segments(); ++i) {
    std::size_t best_j = 1;
    double best = 0.0;
    for (std::size_t j = 1; j <= seg.frames_per_segment(); ++j) {
      const double net =
          detail::costs_from_masked(uniform, apply_mask(m, seg.frame(i, j)), i,
                                    opt.strict_paper_weights)
              .net;
      const bool better = opt.mode == SelectionMode::Argmax ? net > best : net < best;
      if (j == 1 || better) {
        best = net;
        best_j = j;
      }
    }
    picks.push_back(seg.global_index(i, best_j));
  }
  return picks;
}

inline std::vector<std::size_t> select_frames(const VideoSegments& seg,
                                              const SamplerOptions& opt = {}) {
  return select_frames(seg, sampling_mask(seg, opt.normalize_mask), opt);
}

// Argmax of the elementwise sum of two prediction vectors; ties go to the
// lowest class index.
inline std::size_t ensemble(const Tensor& pred_uniform, const Tensor& pred_sampled) {
  if (pred_uniform.dims() != pred_sampled.dims()) {
    throw ShapeError("ensemble: prediction shapes differ: " + to_string(pred_uniform.dims()) +
                     " vs " + to_string(pred_sampled.dims()));
  }
  std::size_t best = 0;
  double best_v = pred_uniform[0] + pred_sampled[0];
  for (std::size_t c = 1; c < pred_uniform.size(); ++c) {
    const double v = pred_uniform[c] + pred_sampled[c];
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

}  // namespace freqmask
