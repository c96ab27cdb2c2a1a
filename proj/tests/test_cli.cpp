#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

#include "cosdd/cli.hpp"
#include "cosdd/image_io.hpp"
#include "cosdd/manifest.hpp"

using namespace cosdd;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cosdd");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cosdd_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> tiny_train(const fs::path& data, const fs::path& out) {
  return {"train",         "--preset",       "small",        "--train",
          data.string(),   "--out",          out.string(),   "--max-steps",
          "4",             "--batch-size",   "2",            "--crop",
          "32",            "--set",          "train.virtual_batches=1",
          "--set",         "model.hidden_channels=8",        "--set",
          "ar.filters=8",  "--set",          "signal.filters=8",
          "--rf-length",   "8",              "--orientation", "column",
          "--seed",        "2",              "--deterministic"};
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(cli({"train", "--help"}) == 0);
  CHECK(cli({"no-such-command"}) == 2);
  CHECK(cli({}) == 2);
  CHECK(cli({"denoise", "--in", "x"}) == 2);
  const auto dir = fresh_dir("codes");
  CHECK(cli({"simulate", "--in", (dir / "missing").string(), "--out", (dir / "o").string()}) == 1);
  CHECK(cli({"train", "--preset", "small", "--set", "n_levles=3", "--train", "x", "--out", "y"}) == 1);
}

TEST_CASE("simulate is reproducible from its manifest parameters") {
  const auto dir = fresh_dir("simulate");
  for (const char* out : {"a", "b"}) {
    REQUIRE(cli({"simulate", "--textures", "4", "--size", "32", "--recipe", "stripe", "--seed", "9", "--out",
                 (dir / out).string()}) == 0);
  }
  const auto a = load_stack(dir / "a" / "noisy"), b = load_stack(dir / "b" / "noisy");
  REQUIRE(a.size() == 4);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(sha256_file(dir / "a" / "noisy" / (fs::path(a.source_ids[k]).stem().string() + ".tif")) ==
          sha256_file(dir / "b" / "noisy" / (fs::path(b.source_ids[k]).stem().string() + ".tif")));
  }
  const auto manifest = slurp(dir / "a" / "manifest.json");
  CHECK(manifest.find("\"seed\": 9") != std::string::npos);
  CHECK(manifest.find("sha256") != std::string::npos);

  for (const char* out : {"c", "d"}) {
    REQUIRE(cli({"simulate", "--in", (dir / "a" / "clean").string(), "--recipe", "stripe", "--seed", "9", "--out",
                 (dir / out).string()}) == 0);
  }
  CHECK((load_stack(dir / "c" / "noisy").images == load_stack(dir / "d" / "noisy").images));
}

TEST_CASE("simulate, train, denoise and evaluate chain together") {
  const auto dir = fresh_dir("pipeline");
  REQUIRE(cli({"simulate", "--textures", "8", "--size", "32", "--seed", "1", "--out", (dir / "sim").string()}) == 0);
  REQUIRE(cli(tiny_train(dir / "sim" / "noisy", dir / "run1")) == 0);
  REQUIRE(cli(tiny_train(dir / "sim" / "noisy", dir / "run2")) == 0);
  // Deterministic reruns log identical losses.
  CHECK(slurp(dir / "run1" / "metrics.csv") == slurp(dir / "run2" / "metrics.csv"));
  for (const char* f : {"model.ckpt", "config.txt", "norm.txt", "manifest.json"}) CHECK(fs::exists(dir / "run1" / f));

  REQUIRE(cli({"denoise", "--ckpt", (dir / "run1" / "model.ckpt").string(), "--in", (dir / "sim" / "noisy").string(),
               "--out", (dir / "den").string(), "--samples", "2", "--save-samples", "1"}) == 0);
  CHECK(load_stack(dir / "den" / "samples" / "sample_000").size() == 8);
  REQUIRE(cli({"evaluate", "--clean", (dir / "sim" / "clean").string(), "--denoised", (dir / "den").string(),
               "--noisy", (dir / "sim" / "noisy").string(), "--unit-range", "--out",
               (dir / "psnr.csv").string()}) == 0);
  const auto csv = slurp(dir / "psnr.csv");
  CHECK(csv.rfind("image,data_range,psnr_denoised,psnr_noisy\n", 0) == 0);
  CHECK(csv.find("\nmean,,") != std::string::npos);
  CHECK(fs::exists(dir / "psnr.manifest.json"));

  REQUIRE(cli({"diagnose-noise", "--ckpt", (dir / "run1" / "model.ckpt").string(), "--in",
               (dir / "sim" / "noisy").string(), "--samples", "2", "--out", (dir / "diag").string()}) == 0);
  CHECK(fs::exists(dir / "diag" / "signal_dependence.csv"));
  CHECK(fs::exists(dir / "diag" / "autocorr_real.png"));
}

TEST_CASE("COSDD_CACHE stores decoded stacks") {
  const auto dir = fresh_dir("cache");
  REQUIRE(cli({"simulate", "--textures", "3", "--size", "16", "--out", (dir / "sim").string()}) == 0);
  ::setenv("COSDD_CACHE", (dir / "cache").string().c_str(), 1);
  REQUIRE(cli({"simulate", "--in", (dir / "sim" / "clean").string(), "--out", (dir / "x").string()}) == 0);
  REQUIRE(cli({"simulate", "--in", (dir / "sim" / "clean").string(), "--out", (dir / "y").string()}) == 0);
  ::unsetenv("COSDD_CACHE");
  int cached = 0;
  for (const auto& e : fs::directory_iterator(dir / "cache")) cached += e.path().extension() == ".npy";
  CHECK(cached == 1);
  CHECK((load_stack(dir / "x" / "noisy").images == load_stack(dir / "y" / "noisy").images));
  CHECK((load_stack(dir / "x" / "noisy").source_ids == load_stack(dir / "y" / "noisy").source_ids));
}
