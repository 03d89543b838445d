#pragma once

// Synthetic videos with ground-truth region labels.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "freqmask/rng.hpp"
#include "freqmask/tensor.hpp"

namespace freqmask {

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class RegionType : std::uint8_t {
  StaticSalient = 0,
  DynamicSalient = 1,
  DynamicBackground = 2,
  StaticBackground = 3,
};

inline bool is_salient(RegionType t) {
  return t == RegionType::StaticSalient || t == RegionType::DynamicSalient;
}
inline bool is_dynamic(RegionType t) {
  return t == RegionType::DynamicSalient || t == RegionType::DynamicBackground;
}

struct Box {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  bool contains(std::size_t y, std::size_t x) const {
    return y >= top && y < top + height && x >= left && x < left + width;
  }
  bool overlaps(const Box& o) const {
    return top < o.top + o.height && o.top < top + height && left < o.left + o.width &&
           o.left < left + width;
  }
};

struct Region {
  RegionType type = RegionType::StaticSalient;
  Box box;
  double amplitude = 1.0;
  double frequency = 0.0;  // cycles per frame; 0 for static regions
  double phase = 0.0;      // radians
};

struct SceneSpec {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t frames = 8;
  std::vector<Region> regions;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (height == 0 || width == 0 || frames == 0) throw SpecError("scene extents must be >= 1");
    if (!(noise_sigma >= 0.0)) throw SpecError("noise_sigma must be >= 0");
    for (std::size_t r = 0; r < regions.size(); ++r) {
      const Region& g = regions[r];
      if (g.box.height == 0 || g.box.width == 0 || g.box.top + g.box.height > height ||
          g.box.left + g.box.width > width) {
        throw SpecError("region " + std::to_string(r) + " lies outside the grid");
      }
      if (is_dynamic(g.type) && !(g.frequency > 0.0)) {
        throw SpecError("dynamic region " + std::to_string(r) + " needs frequency > 0");
      }
      if (!is_dynamic(g.type) && g.frequency != 0.0) {
        throw SpecError("static region " + std::to_string(r) + " must have frequency 0");
      }
      for (std::size_t q = 0; q < r; ++q) {
        if (is_salient(g.type) && is_salient(regions[q].type) && g.box.overlaps(regions[q].box)) {
          throw SpecError("salient regions " + std::to_string(q) + " and " + std::to_string(r) +
                          " overlap");
        }
      }
    }
  }
};

struct Scene {
  Tensor video;                     // [T, 1, H, W]
  std::vector<RegionType> labels;   // row-major [H, W]
  std::size_t height = 0;
  std::size_t width = 0;

  RegionType label(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
};

inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const std::size_t h = spec.height;
  const std::size_t w = spec.width;
  Scene scene{Tensor(Shape{spec.frames, 1, h, w}, 0.0),
              std::vector<RegionType>(h * w, RegionType::StaticBackground), h, w};

  // Label precedence: salient > dynamic background > static background.
  auto rank = [](RegionType t) {
    return is_salient(t) ? 2 : (t == RegionType::DynamicBackground ? 1 : 0);
  };
  for (const Region& g : spec.regions) {
    for (std::size_t y = g.box.top; y < g.box.top + g.box.height; ++y) {
      for (std::size_t x = g.box.left; x < g.box.left + g.box.width; ++x) {
        auto& lab = scene.labels[y * w + x];
        if (rank(g.type) >= rank(lab)) lab = g.type;
        for (std::size_t t = 0; t < spec.frames; ++t) {
          const double v = is_dynamic(g.type)
                               ? g.amplitude * std::sin(2.0 * std::numbers::pi * g.frequency *
                                                            static_cast<double>(t) +
                                                        g.phase)
                               : g.amplitude;
          scene.video[(t * h + y) * w + x] += v;
        }
      }
    }
  }
  if (spec.noise_sigma > 0.0) {
    Rng rng(spec.seed);
    for (auto& v : scene.video.values()) v += rng.normal(0.0, spec.noise_sigma);
  }
  return scene;
}

// Random scene with disjoint static-salient, dynamic-salient and
// dynamic-background boxes over a zero background. Frequencies sit on DFT bins
// strictly between DC and Nyquist.
inline SceneSpec random_scene_spec(std::uint64_t seed, std::size_t frames = 16,
                                   std::size_t height = 16, std::size_t width = 16,
                                   double noise_sigma = 0.0) {
  Rng rng(seed);
  SceneSpec spec;
  spec.height = height;
  spec.width = width;
  spec.frames = frames;
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;
  auto random_box = [&](std::size_t bh, std::size_t bw) {
    return Box{rng.index(height - bh + 1), rng.index(width - bw + 1), bh, bw};
  };
  auto random_bin = [&] {
    return static_cast<double>(1 + rng.index(frames / 2 - 1)) / static_cast<double>(frames);
  };
  Region dyn{RegionType::DynamicSalient, random_box(4, 4), rng.uniform(0.8, 1.0), random_bin(),
             rng.uniform(0.0, 2.0 * std::numbers::pi)};
  Box sbox = random_box(4, 4);
  while (sbox.overlaps(dyn.box)) sbox = random_box(4, 4);
  Region stat{RegionType::StaticSalient, sbox, rng.uniform(0.8, 1.0), 0.0, 0.0};
  Box bbox = random_box(3, 3);
  while (bbox.overlaps(dyn.box) || bbox.overlaps(sbox)) bbox = random_box(3, 3);
  Region bg{RegionType::DynamicBackground, bbox, rng.uniform(0.1, 0.3), random_bin(),
            rng.uniform(0.0, 2.0 * std::numbers::pi)};
  spec.regions = {dyn, stat, bg};
  return spec;
}

// --- motion classification dataset ----------------------------------------

struct MotionDatasetSpec {
  std::size_t num_classes = 4;
  std::size_t train = 200;
  std::size_t eval = 50;
  std::size_t segments = 8;            // frames the model sees
  std::size_t frames_per_segment = 2;  // raw video length = segments * frames_per_segment
  std::size_t height = 16;
  std::size_t width = 16;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;

  std::size_t raw_frames() const { return segments * frames_per_segment; }
};

struct Sample {
  Tensor video;  // [raw_frames, 1, H, W]
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> eval;
};

// Classes cross two oscillation rates with two region extents:
// class c -> bin 1 (even c) or 3 (odd c) at the model's T, extent 4 or 8.
inline std::size_t class_frequency_bin(std::size_t label) { return label % 2 == 0 ? 1 : 3; }
inline std::size_t class_extent(std::size_t label) { return label / 2 == 0 ? 4 : 8; }

// Raw-video frequency (cycles per raw frame) of a class.
inline double class_frequency(const MotionDatasetSpec& spec, std::size_t label) {
  return static_cast<double>(class_frequency_bin(label)) / static_cast<double>(spec.raw_frames());
}

inline SceneSpec motion_scene(const MotionDatasetSpec& spec, std::size_t label,
                              std::uint64_t sample_seed) {
  if (label >= spec.num_classes) throw ArgumentError("motion_scene: label out of range");
  Rng rng(sample_seed);
  SceneSpec s;
  s.height = spec.height;
  s.width = spec.width;
  s.frames = spec.raw_frames();
  s.noise_sigma = spec.noise_sigma;
  s.seed = sample_seed ^ 0x9e3779b97f4a7c15ULL;
  auto random_box = [&](std::size_t bh, std::size_t bw) {
    return Box{rng.index(spec.height - bh + 1), rng.index(spec.width - bw + 1), bh, bw};
  };
  const std::size_t ext = class_extent(label);
  // the context box needs a free 3-pixel strip beside the actor
  if (spec.height < ext + 3 || spec.width < ext + 3) {
    throw ArgumentError("motion_scene: class " + std::to_string(label) + " needs frames of at least " +
                        std::to_string(ext + 3) + "x" + std::to_string(ext + 3));
  }
  Region actor{RegionType::DynamicSalient, random_box(ext, ext), rng.uniform(2.0, 3.0),
               class_frequency(spec, label), rng.uniform(0.0, 2.0 * std::numbers::pi)};
  Box cbox = random_box(3, 3);
  while (cbox.overlaps(actor.box)) cbox = random_box(3, 3);
  Region context{RegionType::StaticSalient, cbox, rng.uniform(0.4, 0.8), 0.0, 0.0};
  const std::size_t raw = spec.raw_frames();
  Region distractor{RegionType::DynamicBackground, random_box(2, 2), 0.2,
                    static_cast<double>(1 + rng.index(raw / 2 - 1)) / static_cast<double>(raw),
                    rng.uniform(0.0, 2.0 * std::numbers::pi)};
  s.regions = {actor, context, distractor};
  return s;
}

inline Dataset motion_classes(const MotionDatasetSpec& spec) {
  if (spec.num_classes < 1 || spec.num_classes > 4) {
    throw ArgumentError("motion_classes supports 1..4 classes");
  }
  if (spec.raw_frames() < 4) throw ArgumentError("motion_classes needs at least 4 raw frames");
  Dataset ds;
  Rng seeds(spec.seed);
  auto make = [&](std::size_t n, std::vector<Sample>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t label = i % spec.num_classes;
      const std::uint64_t sample_seed = static_cast<std::uint64_t>(seeds.uniform() * 0x1.0p53);
      out.push_back({generate_scene(motion_scene(spec, label, sample_seed)).video, label});
    }
  };
  make(spec.train, ds.train);
  make(spec.eval, ds.eval);
  return ds;
}

// --- sampler fixture ------------------------------------------------------

struct BurstFixture {
  std::vector<Tensor> frames;  // [C, H, W] each
  std::size_t segments = 0;
  std::size_t frames_per_segment = 0;
  std::size_t burst_segment = 0;  // 1-based
  std::size_t burst_frame = 0;    // 0-based global index
};

// Static textured background with light per-frame noise; one frame gets a
// bright box added on top.
inline BurstFixture burst_fixture(std::uint64_t seed, std::size_t segments = 4,
                                  std::size_t frames_per_segment = 4, std::size_t channels = 2,
                                  std::size_t height = 8, std::size_t width = 8) {
  Rng rng(seed);
  BurstFixture fx;
  fx.segments = segments;
  fx.frames_per_segment = frames_per_segment;
  fx.burst_segment = 1 + rng.index(segments);
  fx.burst_frame = (fx.burst_segment - 1) * frames_per_segment + rng.index(frames_per_segment);
  Tensor background(Shape{channels, height, width});
  for (auto& v : background.values()) v = rng.uniform(0.5, 1.5);
  const Box box{rng.index(height - 2), rng.index(width - 2), 3, 3};
  const double burst = rng.uniform(1.5, 2.5);
  for (std::size_t f = 0; f < segments * frames_per_segment; ++f) {
    Tensor fr = background;
    for (auto& v : fr.values()) v += rng.normal(0.0, 0.01);
    if (f == fx.burst_frame) {
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t y = box.top; y < box.top + box.height; ++y) {
          for (std::size_t x = box.left; x < box.left + box.width; ++x) fr.at(c, y, x) += burst;
        }
      }
    }
    fx.frames.push_back(std::move(fr));
  }
  return fx;
}

}  // namespace freqmask
