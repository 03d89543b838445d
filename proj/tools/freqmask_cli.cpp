// freqmask command-line tool.
//
// Exit codes: 0 success, 2 I/O, 3 format/shape, 4 missing data,
// 5 gradcheck failure, 6 config/checkpoint mismatch.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "freqmask/freqmask.hpp"

namespace fs = std::filesystem;
using namespace freqmask;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kIo = 2,
  kFormat = 3,
  kMissing = 4,
  kGradcheck = 5,
  kMismatch = 6,
};

struct MissingData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Mismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

io::RunConfig load_config(const std::string& path) {
  return path.empty() ? io::RunConfig{} : io::load_run_config(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw io::IoError("cannot create directory " + dir.string());
}

// --- gen ------------------------------------------------------------------

int cmd_gen(const std::string& spec_path, const std::string& out_dir) {
  const MotionDatasetSpec spec = spec_path.empty() ? MotionDatasetSpec{} : io::load_dataset_spec(spec_path);
  const fs::path out(out_dir);
  ensure_dir(out / "train");
  ensure_dir(out / "eval");
  const Dataset ds = motion_classes(spec);
  std::vector<io::ManifestEntry> manifest;
  auto dump = [&](const std::vector<Sample>& samples, const std::string& split) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%05zu.fvt", i);
      const std::string rel = split + "/" + name;
      io::write_tensor(out / rel, samples[i].video);
      manifest.push_back({rel, samples[i].label});
    }
  };
  dump(ds.train, "train");
  dump(ds.eval, "eval");
  io::write_text(out / "manifest.txt", io::format_manifest(manifest));
  std::cout << "samples=" << manifest.size() << " train=" << ds.train.size()
            << " eval=" << ds.eval.size() << "\n";
  return kOk;
}

// --- mask -----------------------------------------------------------------

int cmd_mask(const std::string& input, const std::string& kind, bool no_normalize,
             const std::string& out) {
  const io::Decoded in = io::read_tensor(input);
  if (in.tensor.rank() != 4) {
    throw ShapeError("mask input must be rank-4 [T,C,H,W], got " + to_string(in.tensor.dims()));
  }
  SaliencyMap m;
  if (kind == "dynamic") {
    m = dynamic_mask(in.tensor);
  } else if (kind == "static") {
    m = static_mask(in.tensor);
  } else {
    m = combined_mask(in.tensor, !no_normalize);
  }
  if (!out.empty()) io::write_tensor(out, m.values, in.dtype);
  double mx = m.values[0];
  for (double v : m.values.values()) mx = std::max(mx, v);
  std::cout << "mean=" << io::format_number(ops::mean_all(m.values))
            << " max=" << io::format_number(mx) << "\n";
  return kOk;
}

// --- sample ---------------------------------------------------------------

int cmd_sample(const std::string& dir, const std::string& config, const std::string& out) {
  const io::RunConfig cfg = load_config(config);
  const std::size_t n = cfg.T * cfg.frames_per_segment;
  std::vector<Tensor> frames;
  frames.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu.fvt", f);
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) throw MissingData("missing frame " + p.string());
    frames.push_back(io::read_tensor(p).tensor);
  }
  if (frames.front().rank() != 3 && frames.front().rank() != 2) {
    throw ShapeError("frames must be [C,H,W] or [H,W], got " + to_string(frames.front().dims()));
  }
  const VideoSegments seg(std::move(frames), cfg.T);
  const auto picks = select_frames(seg, cfg.sampler());
  std::string text;
  for (auto i : picks) text += std::to_string(i) + "\n";
  if (!out.empty()) io::write_text(out, text);
  std::cout << text;
  return kOk;
}

// --- gradcheck ------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, const GradcheckOptions& base) {
  GradcheckOptions opt = base;
#ifdef FREQMASK_GRADCHECK_FAULT
  opt.fault = 1e-2;
#endif
  const GradcheckReport r = run_gradcheck(seed, opt);
  std::cout << "x_p=" << io::format_number(r.x_p) << "\n"
            << "x_mid=" << io::format_number(r.x_mid) << "\n"
            << "weights=" << io::format_number(r.weights) << "\n"
            << (r.passed() ? "PASS" : "FAIL") << " max_rel_err=" << io::format_number(r.worst())
            << " tol=0.0001\n";
  return r.passed() ? kOk : kGradcheck;
}

// --- train / eval ---------------------------------------------------------

struct LoadedDataset {
  std::vector<Sample> train;
  std::vector<Sample> eval;
  std::size_t num_classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t frames = 0;
};

LoadedDataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  const fs::path manifest_path = root / "manifest.txt";
  if (!fs::exists(manifest_path)) throw MissingData("no manifest at " + manifest_path.string());
  std::istringstream ms(std::string(reinterpret_cast<const char*>(io::read_bytes(manifest_path).data()),
                                    fs::file_size(manifest_path)));
  LoadedDataset ds;
  for (const auto& e : io::parse_manifest(ms)) {
    const fs::path p = root / e.path;
    if (!fs::exists(p)) throw MissingData("missing sample " + p.string());
    Tensor video = io::read_tensor(p).tensor;
    if (video.rank() != 4 || video.dims()[1] != 1) {
      throw ShapeError("sample " + e.path + " must be [N,1,H,W], got " + to_string(video.dims()));
    }
    if (ds.frames == 0) {
      ds.frames = video.dims()[0];
      ds.height = video.dims()[2];
      ds.width = video.dims()[3];
    } else if (video.dims()[0] != ds.frames || video.dims()[2] != ds.height ||
               video.dims()[3] != ds.width) {
      throw ShapeError("sample " + e.path + " has shape " + to_string(video.dims()) +
                       ", inconsistent with the rest of the dataset");
    }
    ds.num_classes = std::max(ds.num_classes, e.label + 1);
    auto& split = e.path.rfind("eval/", 0) == 0 ? ds.eval : ds.train;
    split.push_back({std::move(video), e.label});
  }
  return ds;
}

int cmd_train(const std::string& dir, const std::string& config, const std::string& out_dir) {
  const io::RunConfig cfg = load_config(config);
  const LoadedDataset ds = load_dataset(dir);
  if (ds.train.empty()) throw MissingData("dataset has no train/ samples");
  if (ds.frames < cfg.T) {
    throw Mismatch("videos have " + std::to_string(ds.frames) + " frames, config T=" +
                   std::to_string(cfg.T));
  }
  const fs::path out(out_dir);
  ensure_dir(out);

  BackboneShape shape;
  shape.num_classes = ds.num_classes;
  ToyBackbone net(shape, cfg.seed);
  TrainConfig tc;
  tc.lr = cfg.lr;
  tc.momentum = cfg.momentum;
  tc.weight_decay = cfg.weight_decay;
  tc.lambda_mask = cfg.lambda_mask;
  tc.normalize_mask = cfg.normalize_mask;
  tc.epochs = cfg.epochs;
  tc.segments = cfg.T;
  tc.seed = cfg.seed + 1;
  const TrainHistory h = train(ds.train, ds.eval, net, tc);

  std::string metrics;
  for (const auto& e : h.epochs) {
    metrics += "epoch=" + std::to_string(e.epoch) + " ce=" + io::format_number(e.cross_entropy) +
               " lmask=" + io::format_number(e.mask_loss) +
               " acc=" + io::format_number(e.eval_accuracy) + "\n";
  }
  io::write_text(out / "metrics.txt", metrics);
  io::write_bytes(out / "checkpoint.fvt",
                  io::encode_checkpoint(net, {shape, cfg.T, ds.height, ds.width}));
  std::cout << metrics;
  return kOk;
}

int cmd_eval(const std::string& dir, const std::string& config, const std::string& checkpoint,
             bool use_ensemble, bool sum_logits) {
  const io::RunConfig cfg = load_config(config);
  io::Checkpoint ck = io::decode_checkpoint(io::read_bytes(checkpoint));
  const LoadedDataset ds = load_dataset(dir);
  const std::vector<Sample>& samples = ds.eval.empty() ? ds.train : ds.eval;
  if (samples.empty()) throw MissingData("dataset has no samples");
  if (ds.height != ck.meta.height || ds.width != ck.meta.width) {
    throw Mismatch("checkpoint expects " + std::to_string(ck.meta.height) + "x" +
                   std::to_string(ck.meta.width) + " frames, dataset has " +
                   std::to_string(ds.height) + "x" + std::to_string(ds.width));
  }
  if (ds.num_classes > ck.meta.shape.num_classes) {
    throw Mismatch("dataset labels exceed the checkpoint's " +
                   std::to_string(ck.meta.shape.num_classes) + " classes");
  }
  if (cfg.T != ck.meta.T) {
    throw Mismatch("config T=" + std::to_string(cfg.T) + " but checkpoint was trained with T=" +
                   std::to_string(ck.meta.T));
  }
  if (ds.frames < cfg.T) throw Mismatch("videos are shorter than T");
  if (!use_ensemble) {
    std::cout << "top1=" << io::format_number(accuracy(ck.net, samples, cfg.T)) << "\n";
    return kOk;
  }
  const EnsembleAccuracy acc = ensemble_accuracy(ck.net, samples, cfg.T, 0, cfg.sampler(), sum_logits);
  std::cout << "uniform_top1=" << io::format_number(acc.uniform) << "\n"
            << "top1=" << io::format_number(acc.ensemble) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency saliency masks, identity disentanglement loss and frame sampling"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen", "Generate the synthetic motion dataset");
  gen->add_option("--spec", spec_path, "Dataset spec file (key = value)");
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::string mask_input, mask_kind = "combined", mask_out;
  bool no_normalize = false;
  auto* mask = app.add_subcommand("mask", "Compute a saliency mask of a [T,C,H,W] container");
  mask->add_option("input", mask_input, "Input container")->required();
  mask->add_option("--kind", mask_kind, "combined, dynamic or static")
      ->check(CLI::IsMember({"combined", "dynamic", "static"}));
  mask->add_flag("--no-normalize", no_normalize, "Skip mean normalization of the combined mask");
  mask->add_option("--out", mask_out, "Output container");

  std::string sample_dir, config_path, sample_out;
  auto* sample = app.add_subcommand("sample", "Select one frame per segment");
  sample->add_option("dir", sample_dir, "Directory of frame_NNNNN.fvt containers")->required();
  sample->add_option("--config", config_path, "Run config file");
  sample->add_option("--out", sample_out, "Also write the index list here");

  std::uint64_t gc_seed = 1;
  GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--lambda", gc.lambda_mask);
  gradcheck->add_option("--frames", gc.frames);
  gradcheck->add_option("--mid-channels", gc.mid_channels);
  gradcheck->add_option("--mid-size", gc.mid_size);
  gradcheck->add_option("--pen-channels", gc.pen_channels);
  gradcheck->add_option("--pen-size", gc.pen_size);
  gradcheck->add_option("--clip-size", gc.clip_size);

  std::string data_dir, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train the toy backbone");
  train_cmd->add_option("dataset", data_dir, "Dataset directory (from gen)")->required();
  train_cmd->add_option("--config", config_path, "Run config file");
  train_cmd->add_option("--out", train_out, "Output directory for checkpoint and metrics")->required();

  std::string checkpoint;
  bool use_ensemble = false;
  bool sum_logits = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("dataset", data_dir, "Dataset directory (from gen)")->required();
  eval_cmd->add_option("--config", config_path, "Run config file");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint from train")->required();
  eval_cmd->add_flag("--ensemble", use_ensemble, "Also predict on sampled frames and sum");
  eval_cmd->add_flag("--sum-logits", sum_logits, "Ensemble logits instead of probabilities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kMismatch;
  }

  try {
    if (*gen) return cmd_gen(spec_path, out_dir);
    if (*mask) return cmd_mask(mask_input, mask_kind, no_normalize, mask_out);
    if (*sample) return cmd_sample(sample_dir, config_path, sample_out);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc);
    if (*train_cmd) return cmd_train(data_dir, config_path, train_out);
    if (*eval_cmd) return cmd_eval(data_dir, config_path, checkpoint, use_ensemble, sum_logits);
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const io::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const MissingData& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const Mismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
