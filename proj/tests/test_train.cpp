#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "scenediff/data/generator.hpp"
#include "scenediff/grad/checkpoint.hpp"
#include "scenediff/train/train.hpp"

using namespace scenediff;
using namespace scenediff::train;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.hp.points = 32;
  c.hp.d_embed = 8;
  c.hp.d_text = 8;
  c.hp.d_encoder = 8;
  c.hp.d_v = 8;
  c.hp.d_f = 8;
  c.hp.d_time = 4;
  c.hp.d_latent = 6;
  c.hp.d_hidden = 8;
  c.hp.heads = 2;
  c.hp.steps = 20;
  c.hp.batch_size = 4;
  c.epochs = 2;
  return c;
}

const data::Split& small_split() {
  static const data::Split s = [] {
    data::GeneratorConfig g;
    g.points = 64;
    data::Split out;
    out.train = data::gen_dataset(0, 12, g);
    out.test = data::gen_dataset(100, 3, g);
    return out;
  }();
  return s;
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "scenediff_test_train";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("Adam minimizes a quadratic and takes a first step of size lr") {
  grad::ParamStore p;
  p.set("x", grad::DenseArray({2}, std::vector<double>{3.0, -2.0}));
  Adam adam(0.1);
  grad::GradientMap g{{"x", grad::DenseArray({2}, std::vector<double>{6.0, -4.0})}};
  adam.step(p, g);
  CHECK(p.get("x")[0] == doctest::Approx(2.9));
  CHECK(p.get("x")[1] == doctest::Approx(-1.9));
  for (int i = 0; i < 500; ++i) {
    const auto& x = p.get("x");
    adam.step(p, {{"x", grad::DenseArray({2}, std::vector<double>{2 * x[0], 2 * x[1]})}});
  }
  CHECK(std::abs(p.get("x")[0]) < 1e-2);
  CHECK(std::abs(p.get("x")[1]) < 1e-2);
  CHECK(adam.steps() == 501);
}

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_THROWS_AS(scenediff::train::train({}, tiny_config()), std::invalid_argument);
}

TEST_CASE("seeded short runs are identical") {
  auto c = tiny_config();
  c.max_updates = 10;
  c.epochs = 10;
  const auto a = scenediff::train::train(small_split().train, c);
  const auto b = scenediff::train::train(small_split().train, c);
  REQUIRE(a.log.update_losses.size() == 10);
  CHECK(a.log.update_losses == b.log.update_losses);
  CHECK(a.net.params().arrays() == b.net.params().arrays());
  c.seed = 1;
  const auto other = scenediff::train::train(small_split().train, c);
  CHECK(other.log.update_losses != a.log.update_losses);
}

TEST_CASE("training reduces the loss on a small set") {
  auto c = tiny_config();
  c.epochs = 30;
  const auto r = scenediff::train::train(small_split().train, c, small_split().test);
  REQUIRE(r.log.epochs.size() == 30);
  CHECK(r.log.epochs.back().loss < r.log.epochs.front().loss);
  for (const auto& e : r.log.epochs) {
    CHECK(e.guiding_mse.has_value());
    CHECK(e.seconds >= 0.0);
  }
  const auto path = temp_dir() / "log.jsonl";
  write_log(path, r.log);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 30);
}

TEST_CASE("no_v produces no guiding points") {
  auto c = tiny_config();
  c.ablation = Ablation::NoV;
  c.max_updates = 3;
  const auto r = scenediff::train::train(small_split().train, c);
  const auto& scene = small_split().test[0];
  const auto cond = net::make_conditioning(scene, scene.prompt, r.net.vocabulary(), c.hp.points);
  const auto guide = r.net.guide(cond);
  for (double v : guide.s_tilde.values()) CHECK(v == 0.0);
}

TEST_CASE("oracle generator scores perfectly") {
  const Generator oracle = [](const data::Interaction& scene, std::size_t) {
    return Generation{scene.target.cloud, scene.target.cloud, {1.0}};
  };
  const auto rep = evaluate(oracle, small_split().test);
  CHECK(rep.mean.cd == 0.0);
  CHECK(rep.mean.f1 == 1.0);
  CHECK(rep.mean.emd < 1e-9);
  CHECK(rep.mean.ip3d == 0.0);
  REQUIRE(rep.samples.size() == small_split().test.size());
  CHECK(rep.samples[0].id == small_split().test[0].id);
}

TEST_CASE("evaluation is deterministic and survives a checkpoint round trip") {
  auto c = tiny_config();
  c.max_updates = 5;
  const auto r = scenediff::train::train(small_split().train, c);
  const auto stem = temp_dir() / "model";
  save_model(stem, r.net, {{"note", "test"}});

  const auto loaded = load_model(stem);
  CHECK(loaded.hyper().points == c.hp.points);
  CHECK(loaded.ablation() == Ablation::Full);
  const auto a = evaluate(loaded, small_split().test);
  const auto b = evaluate(load_model(stem), small_split().test);
  CHECK(a.mean.cd == b.mean.cd);
  CHECK(a.mean.emd == b.mean.emd);
  CHECK(a.samples[1].generated == b.samples[1].generated);

  const auto stem2 = temp_dir() / "model2";
  save_model(stem2, loaded, {{"note", "test"}});
  CHECK(grad::checkpoint_hash(stem) == grad::checkpoint_hash(stem2));

  EvalOptions other;
  other.seed = 99;
  CHECK(evaluate(loaded, small_split().test, other).samples[0].generated != a.samples[0].generated);
}

TEST_CASE("metadata round trip and load errors") {
  auto hp = net::HyperParams::large();
  hp.learning_rate = 3.5e-4;
  const auto [back, ablation] = from_meta(to_meta(hp, Ablation::NoF));
  CHECK(back.points == hp.points);
  CHECK(back.attention_layers == hp.attention_layers);
  CHECK(back.learning_rate == hp.learning_rate);
  CHECK(ablation == Ablation::NoF);
  CHECK_THROWS_AS(from_meta({}), TrainError);

  const auto missing = temp_dir() / "does_not_exist";
  try {
    load_model(missing);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("does_not_exist") != std::string::npos);
  }
}

TEST_CASE("overfit loop records one loss per update") {
  auto c = tiny_config();
  const auto r = overfit(small_split().train[0], c, 40);
  CHECK(r.log.update_losses.size() == 40);
  const auto sched = diffusion::make_schedule(c.schedule, c.hp.steps);
  const auto sample = make_sample(small_split().train[0], r.net.vocabulary(), c.hp.points);
  const double l1 = expected_loss(r.net, sample, sched, 8, 3);
  CHECK(l1 == expected_loss(r.net, sample, sched, 8, 3));
  CHECK(std::isfinite(l1));
}

TEST_CASE("ablation matrix covers every variant") {
  auto c = tiny_config();
  c.epochs = 1;
  MatrixOptions opts;
  opts.point_counts = {16, 32};
  const auto rows = run_ablation_matrix(small_split().train, {small_split().test[0]}, c, opts);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].variant == "full");
  CHECK(rows[1].variant == "no_v");
  CHECK(rows[7].variant == "N=32");
  const auto csv = matrix_csv(rows);
  CHECK(csv.rfind("variant,seed,cd,emd,f1,guiding_mse,ip3d,final_loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  const auto md = matrix_markdown(rows);
  CHECK(md.find("| no_F |") != std::string::npos);
}
