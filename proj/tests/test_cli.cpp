// Drives the freqmask executable end to end. Paths come from CMake.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "freqmask/io.hpp"
#include "freqmask/scene.hpp"

namespace fs = std::filesystem;
using namespace freqmask;

namespace {

struct CliResult {
  int code;
  std::string out;
};

const fs::path kWork = fs::path(FREQMASK_TEST_WORKDIR) / "cli";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CliResult run_with(const std::string& exe, const std::string& args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt";
  const std::string cmd = exe + " " + args + " > " + out.string() + " 2> " + (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

CliResult run(const std::string& args) { return run_with(FREQMASK_CLI, args); }

fs::path fresh(const std::string& name) {
  const fs::path p = kWork / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

fs::path write_frames(const std::string& name, const std::vector<Tensor>& frames) {
  const fs::path dir = fresh(name);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    char n[32];
    std::snprintf(n, sizeof(n), "frame_%05zu.fvt", f);
    io::write_tensor(dir / n, frames[f]);
  }
  return dir;
}

// Small dataset so train/eval stay quick.
fs::path small_dataset(const std::string& name, std::size_t fps = 2, std::size_t size = 12) {
  const fs::path dir = fresh(name);
  write_file(dir / "spec.txt", "train = 8\neval = 4\nT = 4\nframes_per_segment = " + std::to_string(fps) +
                                   "\nheight = " + std::to_string(size) + "\nwidth = " + std::to_string(size) + "\n");
  EXPECT_EQ(run("gen --spec " + (dir / "spec.txt").string() + " --out " + (dir / "data").string()).code, 0);
  return dir;
}

}  // namespace

TEST(CliGen, DefaultSpecCountsAndDeterminism) {
  const fs::path a = fresh("gen_a"), b = fresh("gen_b");
  ASSERT_EQ(run("gen --out " + a.string()).code, 0);
  ASSERT_EQ(run("gen --out " + b.string()).code, 0);
  std::size_t count = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".fvt") continue;
    ++count;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a)));
  }
  EXPECT_EQ(count, 250u);
  EXPECT_EQ(slurp(a / "manifest.txt"), slurp(b / "manifest.txt"));
}

TEST(CliGen, UnwritableDirectory) {
  EXPECT_EQ(run("gen --out /dev/null/sub").code, 2);
}

TEST(CliMask, ConstantDynamicIsZero) {
  const fs::path dir = fresh("mask_const");
  io::write_tensor(dir / "in.fvt", Tensor(Shape{8, 2, 3, 3}, 0.75));
  const CliResult r = run("mask " + (dir / "in.fvt").string() + " --kind dynamic --out " + (dir / "m.fvt").string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("mean=0 ", 0), 0u) << r.out;
  for (double v : io::read_tensor(dir / "m.fvt").tensor.values()) EXPECT_EQ(v, 0.0);
}

TEST(CliMask, CombinedUnnormalizedConstant) {
  const fs::path dir = fresh("mask_comb");
  const double c = 0.5;
  io::write_tensor(dir / "in.fvt", Tensor(Shape{8, 1, 2, 2}, c));
  ASSERT_EQ(run("mask " + (dir / "in.fvt").string() + " --kind combined --no-normalize --out " +
                (dir / "m.fvt").string()).code, 0);
  for (double v : io::read_tensor(dir / "m.fvt").tensor.values()) EXPECT_NEAR(v, 64 * c * c, 1e-9 * 64 * c * c);
}

TEST(CliMask, FormatErrors) {
  const fs::path dir = fresh("mask_bad");
  auto bytes = io::encode(Tensor(Shape{4, 1, 2, 2}, 1.0));
  bytes[1] = 'X';
  io::write_bytes(dir / "bad.fvt", bytes);
  EXPECT_EQ(run("mask " + (dir / "bad.fvt").string()).code, 3);
  io::write_tensor(dir / "rank3.fvt", Tensor(Shape{4, 2, 2}, 1.0));
  EXPECT_EQ(run("mask " + (dir / "rank3.fvt").string()).code, 3);
  EXPECT_EQ(run("mask " + (dir / "absent.fvt").string()).code, 2);
}

TEST(CliMask, Deterministic) {
  const fs::path dir = fresh("mask_det");
  io::write_tensor(dir / "in.fvt", generate_scene(random_scene_spec(4)).video, io::Dtype::F32);
  ASSERT_EQ(run("mask " + (dir / "in.fvt").string() + " --out " + (dir / "a.fvt").string()).code, 0);
  ASSERT_EQ(run("mask " + (dir / "in.fvt").string() + " --out " + (dir / "b.fvt").string()).code, 0);
  EXPECT_EQ(slurp(dir / "a.fvt"), slurp(dir / "b.fvt"));
  EXPECT_EQ(io::read_tensor(dir / "a.fvt").dtype, io::Dtype::F32);
}

TEST(CliSample, BurstGoldenBothModes) {
  const BurstFixture fx = burst_fixture(16);
  ASSERT_EQ(fx.burst_segment, 2u);
  const fs::path dir = write_frames("burst", fx.frames);
  const fs::path golden = FREQMASK_GOLDEN_DIR;
  const CliResult d = run("sample " + dir.string() + " --config " + (golden / "burst_default.cfg").string() +
                    " --out " + (dir / "picks.txt").string());
  ASSERT_EQ(d.code, 0);
  EXPECT_EQ(d.out, slurp(golden / "burst_sample_default.txt"));
  EXPECT_EQ(slurp(dir / "picks.txt"), d.out);
  std::istringstream lines(d.out);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(std::stoul(line), fx.burst_frame);
  const CliResult s = run("sample " + dir.string() + " --config " + (golden / "burst_strict.cfg").string());
  ASSERT_EQ(s.code, 0);
  EXPECT_EQ(s.out, slurp(golden / "burst_sample_strict.txt"));
}

TEST(CliSample, IdenticalFramesPickSegmentStarts) {
  const fs::path dir = write_frames("same", std::vector<Tensor>(16, Tensor(Shape{1, 4, 4}, 0.3)));
  EXPECT_EQ(run("sample " + dir.string()).out, "0\n2\n4\n6\n8\n10\n12\n14\n");
}

TEST(CliSample, MissingFrames) {
  const fs::path dir = write_frames("short", std::vector<Tensor>(5, Tensor(Shape{1, 4, 4}, 0.3)));
  EXPECT_EQ(run("sample " + dir.string()).code, 4);
}

TEST(CliSample, BadConfig) {
  const fs::path dir = write_frames("cfg", std::vector<Tensor>(16, Tensor(Shape{1, 4, 4}, 0.3)));
  write_file(dir / "bad.cfg", "segments = 8\n");
  EXPECT_EQ(run("sample " + dir.string() + " --config " + (dir / "bad.cfg").string()).code, 6);
}

TEST(CliGradcheck, DefaultAndZeroLambda) {
  const CliResult r = run("gradcheck --seed 2");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("x_mid="), std::string::npos);
  const CliResult z = run("gradcheck --lambda 0");
  EXPECT_EQ(z.code, 0);
  EXPECT_NE(z.out.find("x_p=0\nx_mid=0\n"), std::string::npos) << z.out;
  EXPECT_EQ(run("gradcheck --seed 2").out, r.out);
}

TEST(CliGradcheck, InjectedFaultFails) {
  EXPECT_EQ(run_with(FREQMASK_CLI_FAULT, "gradcheck").code, 5);
}

TEST(CliTrainEval, DeterministicAndMetricsFormat) {
  const fs::path dir = small_dataset("train_det");
  write_file(dir / "run.cfg", "T = 4\nepochs = 2\nseed = 3\n");
  const std::string common = "train " + (dir / "data").string() + " --config " + (dir / "run.cfg").string();
  ASSERT_EQ(run(common + " --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run(common + " --out " + (dir / "b").string()).code, 0);
  const std::string metrics = slurp(dir / "a" / "metrics.txt");
  EXPECT_EQ(metrics, slurp(dir / "b" / "metrics.txt"));
  EXPECT_EQ(slurp(dir / "a" / "checkpoint.fvt"), slurp(dir / "b" / "checkpoint.fvt"));
  std::istringstream lines(metrics);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    EXPECT_EQ(line.rfind("epoch=" + std::to_string(n) + " ce=", 0), 0u) << line;
    EXPECT_NE(line.find(" lmask="), std::string::npos);
    EXPECT_NE(line.find(" acc="), std::string::npos);
  }
  EXPECT_EQ(n, 2);

  const std::string eval = "eval " + (dir / "data").string() + " --config " + (dir / "run.cfg").string() +
                           " --checkpoint " + (dir / "a" / "checkpoint.fvt").string();
  const CliResult e1 = run(eval);
  ASSERT_EQ(e1.code, 0);
  EXPECT_EQ(e1.out.rfind("top1=", 0), 0u);
  EXPECT_EQ(run(eval).out, e1.out);
  const CliResult e2 = run(eval + " --ensemble");
  ASSERT_EQ(e2.code, 0);
  EXPECT_NE(e2.out.find("uniform_top1="), std::string::npos);
  EXPECT_EQ(run(eval + " --ensemble").out, e2.out);
}

TEST(CliTrainEval, DegenerateEnsembleMatchesUniform) {
  // one frame per segment: the sampler can only return the uniform frames
  const fs::path dir = small_dataset("train_fs1", 1);
  write_file(dir / "run.cfg", "T = 4\nepochs = 1\n");
  ASSERT_EQ(run("train " + (dir / "data").string() + " --config " + (dir / "run.cfg").string() + " --out " +
                (dir / "out").string()).code, 0);
  const std::string eval = "eval " + (dir / "data").string() + " --config " + (dir / "run.cfg").string() +
                           " --checkpoint " + (dir / "out" / "checkpoint.fvt").string();
  const std::string plain = run(eval).out;
  const std::string ens = run(eval + " --ensemble").out;
  EXPECT_NE(ens.find("\n" + plain), std::string::npos) << plain << " vs " << ens;
}

TEST(CliTrainEval, Mismatches) {
  const fs::path dir = small_dataset("mismatch");
  write_file(dir / "run.cfg", "T = 4\nepochs = 1\n");
  ASSERT_EQ(run("train " + (dir / "data").string() + " --config " + (dir / "run.cfg").string() + " --out " +
                (dir / "out").string()).code, 0);
  const std::string ck = " --checkpoint " + (dir / "out" / "checkpoint.fvt").string();
  // config T differs from the checkpoint
  write_file(dir / "t2.cfg", "T = 2\n");
  EXPECT_EQ(run("eval " + (dir / "data").string() + " --config " + (dir / "t2.cfg").string() + ck).code, 6);
  // dataset frame size differs from the checkpoint
  const fs::path other = small_dataset("mismatch_other", 2, 16);
  EXPECT_EQ(run("eval " + (other / "data").string() + " --config " + (dir / "run.cfg").string() + ck).code, 6);
  // missing dataset
  EXPECT_EQ(run("eval " + (dir / "nope").string() + ck).code, 4);
  EXPECT_EQ(run("train " + (dir / "nope").string() + " --out " + (dir / "x").string()).code, 4);
  // corrupt checkpoint
  io::write_bytes(dir / "junk.fvt", std::vector<std::uint8_t>{1, 2, 3});
  EXPECT_EQ(run("eval " + (dir / "data").string() + " --config " + (dir / "run.cfg").string() +
                " --checkpoint " + (dir / "junk.fvt").string()).code, 3);
}
