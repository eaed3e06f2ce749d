#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scenediff/data/dataset_io.hpp"
#include "scenediff/serve/cli.hpp"

using scenediff::serve::run_cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "scenediff_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen-data is deterministic") {
  const auto dir = scratch();
  const auto a = (dir / "a.jsonl").string(), b = (dir / "b.jsonl").string();
  CHECK(cli({"gen-data", "--seed", "0", "--count", "200", "--out", a}).code == 0);
  CHECK(cli({"gen-data", "--seed", "0", "--count", "200", "--out", b}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(scenediff::data::load_dataset(a).size() == 200);
  CHECK(cli({"gen-data", "--seed", "1", "--count", "5", "--out", b}).code == 0);
  CHECK(slurp(a) != slurp(b));
}

TEST_CASE("usage errors exit 1") {
  auto r = cli({"frobnicate"});
  CHECK(r.code == 1);
  CHECK(r.err.find("gen-data") != std::string::npos);
  CHECK(cli({}).code == 1);
  CHECK(cli({"synth", "--scene", "x"}).code == 1);
  CHECK(cli({"gen-data", "--count", "many"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("a missing checkpoint exits 2 naming the path") {
  const auto dir = scratch();
  const auto data = (dir / "s.jsonl").string();
  REQUIRE(cli({"gen-data", "--count", "2", "--out", data}).code == 0);
  const auto stem = (dir / "absent" / "model").string();
  const auto r = cli({"synth", "--checkpoint", stem, "--scene", data});
  CHECK(r.code == 2);
  CHECK(r.err.find(stem) != std::string::npos);
  CHECK(cli({"train", "--data", (dir / "nothing.jsonl").string()}).code == 2);
  CHECK(cli({"train", "--data", data, "--config", (dir / "nothing.cfg").string()}).code == 2);
}

TEST_CASE("train, synth, edit and eval work on a tiny model") {
  const auto dir = scratch();
  const auto data = (dir / "tiny.jsonl").string();
  const auto cfg = (dir / "tiny.cfg").string();
  const auto stem = (dir / "tiny").string();
  {
    std::ofstream out(cfg);
    out << "points = 32\nd_embed = 8\nd_text = 8\nd_encoder = 8\nd_v = 8\nd_f = 8\nd_time = 4\n"
           "d_hidden = 8\nheads = 2\nsteps = 10\nepochs = 1\nbatch_size = 4\n";
  }
  REQUIRE(cli({"gen-data", "--count", "8", "--points", "32", "--out", data}).code == 0);
  const auto trained = cli({"train", "--config", cfg, "--data", data, "--out", stem});
  REQUIRE(trained.code == 0);
  CHECK(trained.out.find("epoch 1") != std::string::npos);
  CHECK(fs::exists(stem + ".manifest"));
  CHECK(fs::exists(stem + ".log.jsonl"));

  const auto s1 = cli({"synth", "--checkpoint", stem, "--scene", data, "--seed", "5"});
  const auto s2 = cli({"synth", "--checkpoint", stem, "--scene", data, "--seed", "5"});
  REQUIRE(s1.code == 0);
  CHECK(s1.out == s2.out);
  const auto j = nlohmann::json::parse(s1.out);
  CHECK(j.at("points").size() == 96);

  const auto scene = scenediff::data::load_dataset(data).front();
  const std::string label = scene.entities[1].label;
  const auto moved = cli({"edit", "--checkpoint", stem, "--scene", data, "--op", "displace", "--prompt",
                          "move the " + label + " behind me", "--target-id", "1"});
  CHECK(moved.code == 0);
  const auto bad = cli({"edit", "--checkpoint", stem, "--scene", data, "--op", "displace", "--prompt",
                        "move the " + label, "--target-id", "1"});
  CHECK(bad.code == 2);

  const auto report = (dir / "report.json").string();
  REQUIRE(cli({"eval", "--checkpoint", stem, "--data", data, "--report", report}).code == 0);
  const auto r = nlohmann::json::parse(slurp(report));
  CHECK(r.at("samples").size() == 8);
  CHECK(r.at("mean").contains("cd"));
}

TEST_CASE("verify runs the theory suite") {
  const auto r = cli({"verify", "--skip-gradients"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("PASS discrete backward identity") != std::string::npos);
}
