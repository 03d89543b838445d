// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "freqmask/freqmask.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace freqmask;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) { return io::format_number(v); }

// --- 1 & 2 ----------------------------------------------------------------

void spectral() {
  const auto t0 = Clock::now();
  double worst = 0.0, parseval = 0.0;
  std::uint64_t seed = 0;
  for (std::size_t n : {2u, 3u, 4u, 8u, 16u, 64u}) {
    for (int v = 0; v < 100; ++v) {
      const Tensor x = oracle::random_tensor(++seed, {n, 2, 3, 3});
      const Spectrum s = temporal_dft(x);
      const Tensor p = power(s);
      const std::size_t cols = x.size() / n;
      for (std::size_t c = 0; c < cols; ++c) {
        const auto ref = oracle::naive_dft_column(x, c);
        double time = 0.0, freq = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          worst = std::max(worst, std::abs(s.bins[k * cols + c] - ref[k]));
          time += x[k * cols + c] * x[k * cols + c];
          freq += p[k * cols + c];
        }
        parseval = std::max(parseval, std::abs(freq / double(n) - time) / time);
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, "spectral oracle equivalence", worst < 1e-9 && secs < 5.0,
         "max_abs_err=" + num(worst) + " (tol 1e-9) runtime=" + num(secs) + "s (limit 5s), 600 volumes");
  report(2, "parseval identity", parseval < 1e-9, "max_rel_err=" + num(parseval) + " (tol 1e-9)");
}

// --- 3 --------------------------------------------------------------------

void mask_closed_forms() {
  double dyn_const = 0.0, static_rel = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor frame = oracle::random_tensor(seed, {1, 2, 3, 3}, -3, 3);
    Tensor vol(Shape{8, 2, 3, 3});
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t i = 0; i < frame.size(); ++i) vol[t * frame.size() + i] = frame[i];
    for (double v : dynamic_mask(vol).values.values()) dyn_const = std::max(dyn_const, std::abs(v));
    const double c = frame[0];
    for (double v : static_mask(Tensor(Shape{8, 1, 2, 2}, c)).values.values())
      static_rel = std::max(static_rel, std::abs(v - 64 * c * c) / (64 * c * c));
  }
  Tensor alt(Shape{8, 1, 1, 1});
  for (std::size_t t = 0; t < 8; ++t) alt[t] = t % 2 ? -1.0 : 1.0;
  const double d = dynamic_mask(alt).values[0];
  const double s = static_mask(alt).values[0];
  const double alt_rel = std::max(std::abs(d - 16.0) / 16.0, std::abs(s - 51.2) / 51.2);
  report(3, "mask closed forms", dyn_const <= 1e-12 && static_rel < 1e-9 && alt_rel < 1e-9,
         "dynamic(const) max=" + num(dyn_const) + " static(c) rel_err=" + num(static_rel) +
             " nyquist dynamic=" + num(d) + " static=" + num(s) + " rel_err=" + num(alt_rel));
}

// --- 4 --------------------------------------------------------------------

void gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) worst = std::max(worst, run_gradcheck(seed).worst());
  const double secs = seconds_since(t0);
  report(4, "gradient check", worst < 1e-4 && secs < 60.0,
         "max_rel_err=" + num(worst) + " over 5 seeds (tol 1e-4) runtime=" + num(secs) + "s (limit 60s)");
}

// --- 5 --------------------------------------------------------------------

double region_mean(const Scene& s, const Tensor& m, bool (*pick)(RegionType)) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.labels.size(); ++i)
    if (pick(s.labels[i])) {
      sum += m[i];
      ++n;
    }
  return sum / double(n);
}

void disentanglement_ordering() {
  int combined_ok = 0, ordering_ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = generate_scene(random_scene_spec(seed));
    const Tensor comb = combined_mask(s.video).values;
    const Tensor dyn = dynamic_mask(s.video).values;
    const Tensor stat = static_mask(s.video).values;
    auto salient = [](RegionType t) { return is_salient(t); };
    auto background = [](RegionType t) { return t == RegionType::StaticBackground; };
    auto dsal = [](RegionType t) { return t == RegionType::DynamicSalient; };
    auto ssal = [](RegionType t) { return t == RegionType::StaticSalient; };
    if (region_mean(s, comb, salient) > region_mean(s, comb, background)) ++combined_ok;
    if (region_mean(s, dyn, dsal) > region_mean(s, dyn, ssal) &&
        region_mean(s, stat, ssal) > region_mean(s, stat, dsal))
      ++ordering_ok;
  }
  report(5, "synthetic disentanglement ordering", combined_ok == 50 && ordering_ok == 50,
         "salient>background " + std::to_string(combined_ok) + "/50, dynamic/static ordering " +
             std::to_string(ordering_ok) + "/50");
}

// --- 6 --------------------------------------------------------------------

void sampler() {
  auto feat = [](double a, double b) { return Tensor(Shape{1, 1, 2}, std::vector<double>{a, b}); };
  const VideoSegments toy({feat(0, 0), feat(1, 2), feat(2, 1), feat(3, 3), feat(1, -1), feat(0, 4)}, 3);
  const SaliencyMap ones{Tensor(Shape{1, 1, 2}, 1.0)};
  // hand expansion, uniform frames (0,0) (2,1) (1,-1)
  bool exact = true;
  {
    const SegmentCosts c = segment_costs(toy, ones, 2, 2);
    const double cp = 2.0 / 3.0 * ((9.0 + 9.0) / 2.0);
    const double cf = 2.0 / 3.0 * ((4.0 + 16.0) / 2.0);
    const double wp = cp / (cp + cf) * 2.0, wf = cf / (cp + cf) * 1.0;
    exact &= c.prior == cp && c.future == cf && c.net == wp * cp + wf * cf;
  }
  {
    const SegmentCosts c = segment_costs(toy, ones, 1, 2);
    const double cf = 2.0 / 3.0 * ((1.0 + 1.0) / 2.0) + 1.0 / 3.0 * ((0.0 + 9.0) / 2.0);
    exact &= c.prior == 0.0 && c.future == cf && c.net == 2.0 * cf;
  }
  {
    const SegmentCosts c = segment_costs(toy, ones, 3, 1);  // x = (1,-1)
    const double cp = 1.0 / 3.0 * ((1.0 + 1.0) / 2.0) + 2.0 / 3.0 * ((1.0 + 4.0) / 2.0);
    exact &= c.prior == cp && c.future == 0.0 && c.net == 3.0 * cp;
  }
  bool boundary = true;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const BurstFixture fx = burst_fixture(seed);
    const VideoSegments seg(fx.frames, fx.segments);
    const SaliencyMap m = sampling_mask(seg);
    for (std::size_t j = 1; j <= seg.frames_per_segment(); ++j) {
      boundary &= segment_costs(seg, m, 1, j).prior == 0.0;
      boundary &= segment_costs(seg, m, seg.segments(), j).future == 0.0;
    }
    if (select_frames(seg, m)[fx.burst_segment - 1] == fx.burst_frame) ++hits;
  }
  report(6, "sampler correctness", exact && boundary && hits >= 95,
         std::string("hand oracle ") + (exact ? "exact" : "MISMATCH") + ", boundary identities " +
             (boundary ? "exact" : "VIOLATED") + ", burst selected " + std::to_string(hits) + "/100 (need 95)");
}

// --- CLI helpers ----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(const std::string& args, const fs::path& work) {
  const fs::path out = work / "stdout.txt";
  const std::string cmd = std::string(FREQMASK_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

std::size_t digest(const std::string& bytes) { return std::hash<std::string>{}(bytes); }

// Every file under `dir` plus stdout, in path order.
std::string tree_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "stdout.txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + slurp(f);
  return all;
}

// --- 7 & 8 ----------------------------------------------------------------

void training_and_ensemble(const fs::path& work) {
  const MotionDatasetSpec spec;  // 4 classes, 200/50, T = 8, 16x16
  const Dataset ds = motion_classes(spec);
  TrainConfig cfg;  // lr 0.01, momentum 0.9, weight decay 0.0005, lambda 0.1, 30 epochs
  cfg.seed = 2;
  ToyBackbone net(BackboneShape{}, 1);
  const auto t0 = Clock::now();
  const TrainHistory h = train(ds.train, ds.eval, net, cfg);
  const double secs = seconds_since(t0);
  for (const auto& e : h.epochs)
    std::printf("  epoch=%zu ce=%s lmask=%s acc=%s\n", e.epoch, num(e.cross_entropy).c_str(),
                num(e.mask_loss).c_str(), num(e.eval_accuracy).c_str());
  const double acc = h.epochs.back().eval_accuracy;
  const double lm_first = h.epochs.front().mask_loss, lm_last = h.epochs.back().mask_loss;
  int down = 0;
  for (std::size_t e = 1; e <= 5 && e < h.epochs.size(); ++e) {
    const double a = h.epochs[e - 1].cross_entropy + h.epochs[e - 1].mask_loss;
    const double b = h.epochs[e].cross_entropy + h.epochs[e].mask_loss;
    if (b <= a) ++down;
  }
  report(7, "end-to-end toy training", acc > 0.9 && secs < 600.0 && lm_last < lm_first,
         "final eval top1=" + num(acc) + " (need > 0.9) after " + std::to_string(h.epochs.size()) +
             " epochs, runtime=" + num(secs) + "s (limit 600s), lmask epoch1=" + num(lm_first) +
             " final=" + num(lm_last) + "; loss non-increasing in " + std::to_string(down) +
             "/5 early transitions");

  // Ensemble: identical vectors never move the argmax.
  bool identical_ok = true;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Tensor p = oracle::random_tensor(seed, {4 + seed % 5}, 0, 1);
    identical_ok &= ensemble(p, p) == argmax(p);
  }
  // Run the CLI eval on the trained model over the same dataset written by gen.
  const fs::path dir = work / "c8";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const bool gen_ok = cli("gen --out " + (dir / "data").string(), dir).code == 0;
  io::write_bytes(dir / "checkpoint.fvt", io::encode_checkpoint(net, {net.shape(), cfg.segments, spec.height, spec.width}));
  const CliRun ev = cli("eval " + (dir / "data").string() + " --checkpoint " + (dir / "checkpoint.fvt").string() +
                            " --ensemble",
                        dir);
  double uniform = -1, ens = -1;
  std::istringstream lines(ev.out);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("uniform_top1=", 0) == 0) uniform = std::stod(line.substr(13));
    if (line.rfind("top1=", 0) == 0) ens = std::stod(line.substr(5));
  }
  const bool ok = identical_ok && gen_ok && ev.code == 0 && uniform >= 0 && ens >= uniform - 0.02;
  report(8, "ensemble property", ok,
         std::string("identical-sum argmax ") + (identical_ok ? "stable" : "CHANGED") + " (1000 cases), cli eval exit=" +
             std::to_string(ev.code) + " uniform top1=" + num(uniform) + " ensemble top1=" + num(ens) +
             " (need >= uniform - 0.02)");
}

// --- 9 --------------------------------------------------------------------

void determinism(const fs::path& work) {
  const fs::path base = work / "c9";
  fs::remove_all(base);
  fs::create_directories(base);
  {
    std::ofstream(base / "spec.txt") << "train = 12\neval = 8\nT = 4\nheight = 12\nwidth = 12\nseed = 5\n";
    std::ofstream(base / "run.cfg") << "T = 4\nepochs = 3\nseed = 9\n";
    std::ofstream(base / "sample.cfg") << "T = 4\nframes_per_segment = 4\n";
    const BurstFixture fx = burst_fixture(21);
    fs::create_directories(base / "frames");
    for (std::size_t f = 0; f < fx.frames.size(); ++f) {
      char n[32];
      std::snprintf(n, sizeof(n), "frame_%05zu.fvt", f);
      io::write_tensor(base / "frames" / n, fx.frames[f]);
    }
    io::write_tensor(base / "video.fvt", generate_scene(random_scene_spec(3, 16, 16, 16, 0.05)).video);
  }
  auto rel = [&](const std::string& p) { return (base / p).string(); };
  // each command writes into its own run directory `R`
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "gen --spec " + rel("spec.txt") + " --out R/data"},
      {"mask", "mask " + rel("video.fvt") + " --out R/mask.fvt"},
      {"sample", "sample " + rel("frames") + " --config " + rel("sample.cfg") + " --out R/picks.txt"},
      {"gradcheck", "gradcheck --seed 4"},
      {"train", "train " + rel("ref/data") + " --config " + rel("run.cfg") + " --out R/model"},
      {"eval", "eval " + rel("ref/data") + " --config " + rel("run.cfg") + " --checkpoint " +
                   rel("ref/model/checkpoint.fvt") + " --ensemble"},
  };
  // reference dataset + model the later commands read
  fs::create_directories(base / "ref");
  bool ok = cli("gen --spec " + rel("spec.txt") + " --out " + rel("ref/data"), base).code == 0;
  ok &= cli("train " + rel("ref/data") + " --config " + rel("run.cfg") + " --out " + rel("ref/model"), base).code == 0;
  std::string detail;
  for (const auto& [name, args] : commands) {
    std::size_t hashes[2];
    bool same_code = true;
    int codes[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path rdir = base / (name + "_" + std::to_string(rep));
      fs::remove_all(rdir);
      fs::create_directories(rdir);
      std::string a = args;
      for (std::size_t pos; (pos = a.find("R/")) != std::string::npos;) a.replace(pos, 2, rdir.string() + "/");
      const CliRun r = cli(a, rdir);
      codes[rep] = r.code;
      hashes[rep] = digest(r.out + tree_bytes(rdir));
    }
    same_code = codes[0] == codes[1] && codes[0] == 0;
    const bool match = same_code && hashes[0] == hashes[1];
    ok &= match;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%016zx", hashes[0]);
    detail += name + (match ? "=" : "!=") + std::string(buf) + " ";
  }
  report(9, "determinism", ok, detail + "(2 runs each, stdout + written files)");
}

}  // namespace

int main() {
  const fs::path work = fs::path(FREQMASK_TEST_WORKDIR) / "acceptance";
  fs::create_directories(work);
  spectral();
  mask_closed_forms();
  gradient_check();
  disentanglement_ordering();
  sampler();
  training_and_ensemble(work);
  determinism(work);
  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
