#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "support/fixtures.hpp"
#include "yieldest/cli.hpp"
#include "yieldest/data_io.hpp"
#include "yieldest/png_io.hpp"
#include "yieldest/rle.hpp"
#include "yieldest/service.hpp"

using namespace yieldest;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int process_exit(const std::string& args) {
  const std::string cmd = std::string(YIELDEST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  fixtures::TempDir dir;
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"yield"}).code, 2);
  EXPECT_EQ(cli({"yield", "--scene", (dir / "missing.json").string()}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);

  write_text_file(dir / "bad.json", "{\"format_version\": 1,");
  const CliRun bad = cli({"yield", "--scene", (dir / "bad.json").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("error ["), std::string::npos);
  EXPECT_EQ(cli({"evaluate", "--out-dir", (dir / "e").string()}).code, 1);

  // Same codes from the installed binary.
  EXPECT_EQ(process_exit(""), 2);
  EXPECT_EQ(process_exit("--help"), 0);
  EXPECT_EQ(process_exit("yield --scene " + (dir / "bad.json").string()), 1);
  EXPECT_EQ(process_exit("simulate --no-render --trees 1 --fruits-per-tree 4 --out " + (dir / "s").string()), 0);
}

TEST(Cli, SimulateIsByteIdentical) {
  fixtures::TempDir dir;
  for (const char* sub : {"a", "b"}) {
    const CliRun r = cli({"simulate", "--seed", "7", "--trees", "1", "--fruits-per-tree", "8", "--out", (dir / sub).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir / "a"));
  }
  EXPECT_GT(files.size(), 6u);
  for (const auto& f : files) {
    const std::string a = slurp(dir / "a" / f);
    std::string b = slurp(dir / "b" / f);
    // Manifests embed their own directory.
    if (f.string().find("manifest") != std::string::npos) {
      for (std::size_t p; (p = b.find((dir / "b").string())) != std::string::npos;) b.replace(p, (dir / "b").string().size(), (dir / "a").string());
    }
    EXPECT_EQ(a, b) << f;
  }
}

TEST(Cli, YieldEqualsTruthWithoutOverlap) {
  fixtures::TempDir dir;
  ASSERT_EQ(cli({"simulate", "--no-render", "--both-side-fraction", "0", "--out", (dir / "s").string()}).code, 0);
  const json truth = json::parse(slurp(dir / "s/truth.json"));
  const CliRun r = cli({"yield", "--scene", (dir / "s/scene.json").string(), "--out", (dir / "r").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const long t = truth["truth"];
  EXPECT_NE(r.out.find(std::to_string(t) + " (100.00%)"), std::string::npos) << r.out;
  const json report = json::parse(slurp(dir / "r.json"));
  EXPECT_EQ(report["reports"][0]["merged_total"], t);
  EXPECT_EQ(report["reports"][0]["merged_accuracy"], "100.00%");
  EXPECT_TRUE(fs::exists(dir / "r.txt"));
}

TEST(Cli, EvaluatePerfectDetections) {
  fixtures::TempDir dir;
  ASSERT_EQ(cli({"simulate", "--trees", "1", "--fruits-per-tree", "10", "--out", (dir / "s").string()}).code, 0);
  const auto gts = load_bbox_annotations(dir / "s/sim-front.boxes.json");
  std::vector<Detection> dets;
  for (const auto& g : gts) {
    for (const auto& b : g.boxes) dets.push_back({g.frame_id, b, BinaryMask(b.w, b.h, true), b.area()});
  }
  write_detections(dir / "d.jsonl", dets);
  write_text_file(dir / "pairs.csv", "predicted,truth\n1,1\n2,2\n0,0\n3,2\n");
  const CliRun r = cli({"evaluate", "--detections", (dir / "d.jsonl").string(), "--annotations",
                     (dir / "s/sim-front.boxes.json").string(), "--count-pairs", (dir / "pairs.csv").string(), "--out-dir",
                     (dir / "e").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(slurp(dir / "e/metrics.json"));
  ASSERT_EQ(m["curves"][0]["points"].size(), 99u);
  for (const auto& p : m["curves"][0]["points"]) {
    EXPECT_DOUBLE_EQ(p["precision"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(p["recall"].get<double>(), 1.0);
  }
  for (const char* f : {"recall.svg", "precision.svg", "f1.svg", "confusion.csv", "confusion.json"}) EXPECT_TRUE(fs::exists(dir / "e" / f)) << f;
  EXPECT_DOUBLE_EQ(json::parse(r.out)["count_accuracy"].get<double>(), 0.75);
}

TEST(Cli, TrainAndDetectMatchApi) {
  fixtures::TempDir dir;
  const auto data = fixtures::write_sim_dataset(dir / "orchard", "sim", 11);
  const DetectConfig cfg = fixtures::small_detect_config();
  const auto& frames = data.scene.frames;
  ASSERT_GE(frames.size(), 3u);

  SupervisionSession local("sim", {{frames[0].id, rgb_to_lab(frames[0].image)}, {frames[1].id, rgb_to_lab(frames[1].image)}}, cfg);
  const auto clicks = fixtures::supervise(local, {frames[0].apple_mask, frames[1].apple_mask});
  ASSERT_FALSE(clicks.empty());
  write_click_script(clicks, dir / "clicks.json");

  const std::string ids = frames[0].id + "," + frames[1].id;
  CliRun r = cli({"train-color-model", "--manifest", data.manifest.string(), "--clicks", (dir / "clicks.json").string(), "--frames",
               ids, "--slic-target", "600", "--components", "12", "--seed", std::to_string(cfg.em.rng_seed), "--out",
               (dir / "model.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli({"detect", "--manifest", data.manifest.string(), "--model", (dir / "model.json").string(), "--masks-dir",
           (dir / "masks").string(), "--out", (dir / "d.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;

  Service s({dir / "orchard", dir / "state", std::nullopt});
  const auto post = [&](const std::string& path, const json& body) {
    return s.handle({"POST", path, {}, body.is_null() ? "" : body.dump(), std::nullopt});
  };
  const ApiResponse created = post("/v1/sessions", {{"dataset", "sim"}, {"frames", {frames[0].id, frames[1].id}}, {"config", to_json(cfg)}});
  ASSERT_EQ(created.status, 201) << created.body;
  const std::string sid = json::parse(created.body)["session_id"];
  for (const auto& c : clicks) {
    const ApiResponse cr = post("/v1/sessions/" + sid + "/click", {{"frame", c.frame_id}, {"x", c.x}, {"y", c.y}});
    ASSERT_EQ(cr.status, 200);
    post("/v1/sessions/" + sid + "/label", {{"component_id", json::parse(cr.body)["component_id"]}, {"label", to_string(c.label)}});
  }
  const ApiResponse fin = post("/v1/sessions/" + sid + "/finalize", nullptr);
  ASSERT_EQ(fin.status, 201) << fin.body;
  const std::string model_id = json::parse(fin.body)["model_id"];

  for (const auto& f : frames) {
    const ApiResponse d = s.handle({"POST", "/v1/models/" + model_id + "/detect", {{"frame", f.id}}, "", std::nullopt});
    ASSERT_EQ(d.status, 200) << d.body;
    EXPECT_EQ(rle_decode(rle_from_json(json::parse(d.body)["mask_rle"])), read_png_mask(dir / "masks" / (f.id + ".png"))) << f.id;
  }
}
