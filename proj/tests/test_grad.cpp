#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "scenediff/grad/checkpoint.hpp"
#include "scenediff/grad/gradcheck.hpp"
#include "scenediff/grad/graph.hpp"
#include "scenediff/grad/param_store.hpp"

using namespace scenediff::grad;

namespace {

DenseArray random_array(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  DenseArray a(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : a.values()) v = dist(rng);
  return a;
}

}  // namespace

TEST_CASE("square of a scalar evaluates and differentiates") {
  ParamStore params;
  params.set("x", DenseArray::scalar(3.0));
  Graph g;
  const NodeId x = g.param(params, "x");
  const NodeId y = g.mul(x, x);
  g.mark_output("y", y);
  CHECK(evaluate(g, {}, params).at("y").item() == 9.0);
  CHECK(gradients(g, y, {}, params).at("x").item() == 6.0);
}

TEST_CASE("softmax of equal logits is uniform") {
  Graph g;
  const NodeId x = g.input("x", {3});
  g.mark_output("p", g.softmax(x));
  const auto out = evaluate(g, {{"x", DenseArray({3}, 0.0)}}, ParamStore{});
  for (double v : out.at("p").values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("mean squared matmul residual matches the closed-form gradient") {
  ParamStore params;
  params.set("A", DenseArray::from_rows({{1.0, 2.0}, {-0.5, 0.25}}));
  const DenseArray B = DenseArray::from_rows({{0.3, -1.2}, {2.0, 0.7}});
  const DenseArray C = DenseArray::from_rows({{1.0, 0.0}, {0.5, -2.0}});
  Graph g;
  const NodeId a = g.param(params, "A");
  const NodeId r = g.sub(g.matmul(a, g.constant(B)), g.constant(C));
  const NodeId loss = g.mean(g.mul(r, r));
  const DenseArray grad = gradients(g, loss, {}, params).at("A");

  // 2/n * (AB - C) B^T with n = 4 elements.
  const DenseArray& A = params.get("A");
  double residual[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      residual[i][j] = A.at(i, 0) * B.at(0, j) + A.at(i, 1) * B.at(1, j) - C.at(i, j);
    }
  }
  for (int i = 0; i < 2; ++i) {
    for (int p = 0; p < 2; ++p) {
      const double expected = 0.5 * (residual[i][0] * B.at(p, 0) + residual[i][1] * B.at(p, 1));
      CHECK(grad.at(i, p) == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("random five-op graph agrees with central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    ParamStore params(seed);
    params.create("w", {4, 3}, 4);
    params.create("b", {3}, 3);
    Graph g;
    const NodeId x = g.input("x", {5, 4});
    const NodeId h = g.matmul(x, g.param(params, "w"));
    const NodeId hb = g.add(h, g.broadcast(g.param(params, "b"), {5, 3}));
    const NodeId act = g.gelu(hb);
    const NodeId p = g.softmax(act);
    const NodeId loss = g.sum(g.mul(p, act));
    const Bindings in{{"x", random_array({5, 4}, rng)}};
    const auto report = gradcheck(g, loss, in, params, {.step = 1e-6});
    CHECK(max_error(report) < 1e-4);
  }
}

TEST_CASE("linear layer gradcheck is tight") {
  std::mt19937_64 rng(11);
  ParamStore params(3);
  params.create("w", {6, 4}, 6);
  params.create("b", {4}, 6);
  Graph g;
  const NodeId x = g.input("x", {8, 6});
  const NodeId y = g.add(g.matmul(x, g.param(params, "w")), g.broadcast(g.param(params, "b"), {8, 4}));
  const NodeId loss = g.mean(g.mul(y, y));
  const auto report = gradcheck(g, loss, {{"x", random_array({8, 6}, rng)}}, params);
  CHECK(report.size() == 2);
  CHECK(max_error(report) < 1e-6);
}

TEST_CASE("every primitive passes gradcheck") {
  std::mt19937_64 rng(5);
  ParamStore params(9);
  params.create("a", {2, 3, 4}, 4);
  params.create("b", {2, 4, 3}, 4);
  params.create("c", {4}, 4);
  Graph g;
  const NodeId a = g.param(params, "a");
  const NodeId b = g.param(params, "b");
  const NodeId c = g.param(params, "c");
  const NodeId bmm = g.matmul(a, b);                                  // [2,3,3]
  const NodeId t = g.transpose(bmm);                                  // [2,3,3]
  const NodeId cat = g.concat({t, g.slice(a, 2, 1, 4)}, 2);           // [2,3,6]
  const NodeId ln = g.layer_norm(cat);                                // [2,3,6]
  const NodeId rep = g.repeat(g.mean(ln, 1), 1, 3);                   // [2,3,6]
  const NodeId mix = g.add(g.mul(ln, rep), g.scale(cat, 0.3));
  const NodeId rs = g.reshape(mix, {6, 6});
  const NodeId sm = g.softmax(g.gelu(rs));
  const NodeId cb = g.broadcast(g.reshape(g.sum(g.reshape(c, {2, 2}), 0), {1, 2}), {3, 2});
  const NodeId loss = g.add(g.sum(g.mul(sm, rs)), g.sum(g.mul(cb, cb)));
  const auto report = gradcheck(g, loss, {}, params);
  CHECK(report.size() == 3);
  CHECK(max_error(report) < 1e-4);
}

TEST_CASE("multi-head self-attention block passes gradcheck") {
  std::mt19937_64 rng(21);
  const std::size_t tokens = 5, width = 8, heads = 2, head = width / heads;
  ParamStore params(17);
  for (const char* n : {"wq", "wk", "wv", "wo"}) params.create(n, {width, width}, width);
  Graph g;
  const NodeId x = g.input("x", {tokens, width});
  const NodeId q = g.matmul(x, g.param(params, "wq"));
  const NodeId k = g.matmul(x, g.param(params, "wk"));
  const NodeId v = g.matmul(x, g.param(params, "wv"));
  std::vector<NodeId> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const NodeId qh = g.slice(q, 1, h * head, (h + 1) * head);
    const NodeId kh = g.slice(k, 1, h * head, (h + 1) * head);
    const NodeId vh = g.slice(v, 1, h * head, (h + 1) * head);
    const NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(head)));
    outs.push_back(g.matmul(g.softmax(scores), vh));
  }
  const NodeId o = g.matmul(g.concat(outs, 1), g.param(params, "wo"));
  const NodeId loss = g.mean(g.mul(o, o));
  const auto report = gradcheck(g, loss, {{"x", random_array({tokens, width}, rng)}}, params);
  CHECK(max_error(report) < 1e-4);
}

TEST_CASE("graph without parameters gives an empty gradcheck report") {
  Graph g;
  const NodeId x = g.input("x", {2});
  const NodeId loss = g.sum(g.mul(x, x));
  CHECK(gradcheck(g, loss, {{"x", DenseArray({2}, 1.0)}}, ParamStore{}).empty());
}

TEST_CASE("gradient of a sum of losses is the sum of gradients") {
  std::mt19937_64 rng(2);
  ParamStore params(4);
  params.create("w", {3, 3}, 3);
  const DenseArray xin = random_array({4, 3}, rng);
  auto build = [&](Graph& g, int which) {
    const NodeId x = g.input("x", {4, 3});
    const NodeId y = g.matmul(x, g.param(params, "w"));
    const NodeId l1 = g.sum(g.gelu(y));
    const NodeId l2 = g.mean(g.mul(y, y));
    if (which == 1) return l1;
    if (which == 2) return l2;
    return g.add(l1, l2);
  };
  Graph g1, g2, g12;
  const auto d1 = gradients(g1, build(g1, 1), {{"x", xin}}, params).at("w");
  const auto d2 = gradients(g2, build(g2, 2), {{"x", xin}}, params).at("w");
  const auto d12 = gradients(g12, build(g12, 3), {{"x", xin}}, params).at("w");
  for (std::size_t i = 0; i < d12.size(); ++i) CHECK(d12[i] == doctest::Approx(d1[i] + d2[i]).epsilon(1e-13));
}

TEST_CASE("softmax rows sum to one and the Jacobian annihilates constants") {
  std::mt19937_64 rng(8);
  ParamStore params;
  params.set("x", random_array({4, 7}, rng, 3.0));
  Graph g;
  const NodeId x = g.param(params, "x");
  const NodeId p = g.softmax(x);
  g.mark_output("p", p);
  const auto out = evaluate(g, {}, params).at("p");
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) s += out.at(r, j);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  // Sum over outputs of dy_k/dx_j is the gradient of sum(y), which must vanish.
  const auto grad_total = gradients(g, g.sum(p), {}, params).at("x");
  for (double v : grad_total.values()) CHECK(std::abs(v) < 1e-10);
  // Sum over inputs of dy_k/dx_j: shifting a row leaves the softmax unchanged.
  for (std::size_t k = 0; k < 7; ++k) {
    Graph gk;
    const NodeId xk = gk.param(params, "x");
    const NodeId pick = gk.sum(gk.slice(gk.softmax(xk), 1, k, k + 1));
    const auto jac = gradients(gk, pick, {}, params).at("x");
    for (std::size_t r = 0; r < 4; ++r) {
      double row = 0.0;
      for (std::size_t j = 0; j < 7; ++j) row += jac.at(r, j);
      CHECK(std::abs(row) < 1e-10);
    }
  }
}

TEST_CASE("evaluate is bit-reproducible") {
  std::mt19937_64 rng(1);
  ParamStore params(99);
  params.create("w", {5, 5}, 5);
  const DenseArray xin = random_array({3, 5}, rng);
  Graph g;
  g.mark_output("y", g.layer_norm(g.gelu(g.matmul(g.input("x", {3, 5}), g.param(params, "w")))));
  CHECK(evaluate(g, {{"x", xin}}, params).at("y") == evaluate(g, {{"x", xin}}, params).at("y"));
  ParamStore again(99);
  again.create("w", {5, 5}, 5);
  CHECK(again.get("w") == params.get("w"));
}

TEST_CASE("initialization respects the fan-in bound") {
  ParamStore params(3);
  const DenseArray& w = params.create("w", {16, 16}, 16);
  for (double v : w.values()) CHECK(std::abs(v) <= 0.25);
  CHECK_THROWS(params.create("w", {1}, 1));
}

TEST_CASE("errors name the offending node") {
  Graph g;
  const NodeId a = g.input("a", {2, 3});
  const NodeId b = g.input("b", {3, 2});
  CHECK_THROWS_WITH_AS(g.add(a, b), doctest::Contains("node 2 (add)"), ShapeError);
  CHECK_THROWS_AS(g.matmul(a, a), ShapeError);

  const NodeId m = g.matmul(a, b);
  g.mark_output("m", m);
  CHECK_THROWS_WITH_AS(evaluate(g, {{"a", DenseArray({2, 3})}, {"b", DenseArray({2, 2})}}, ParamStore{}),
                       doctest::Contains("'b'"), ShapeError);

  DenseArray bad({2, 3}, 1.0);
  bad[4] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(evaluate(g, {{"a", bad}, {"b", DenseArray({3, 2})}}, ParamStore{}),
                       doctest::Contains("node 0"), NumericError);

  CHECK_THROWS_AS(gradients(g, m, {{"a", DenseArray({2, 3})}, {"b", DenseArray({3, 2})}}, ParamStore{}),
                  ShapeError);
}

TEST_CASE("checkpoint round trip keeps float32 precision and metadata") {
  const auto dir = std::filesystem::temp_directory_path() / "scenediff_test_ckpt";
  std::filesystem::remove_all(dir);
  ParamStore params(42);
  params.create("layer.w", {3, 4}, 3);
  params.create("layer.b", {4}, 3);
  params.set("scalar", DenseArray::scalar(1.0 / 3.0));
  save_checkpoint(dir / "model", params, {{"preset", "desk"}});
  const Checkpoint loaded = load_checkpoint(dir / "model");
  CHECK(loaded.params.seed() == 42);
  CHECK(loaded.meta.at("preset") == "desk");
  for (const auto& [name, array] : params.arrays()) {
    const DenseArray& back = loaded.params.get(name);
    REQUIRE(back.shape() == array.shape());
    for (std::size_t i = 0; i < array.size(); ++i) {
      CHECK(back[i] == static_cast<double>(static_cast<float>(array[i])));
    }
  }
  // A second save of the upcast values is byte-identical.
  save_checkpoint(dir / "again", loaded.params, loaded.meta);
  save_checkpoint(dir / "again2", load_checkpoint(dir / "again").params, loaded.meta);
  CHECK(checkpoint_hash(dir / "again") == checkpoint_hash(dir / "again2"));
  CHECK_THROWS_WITH(load_checkpoint(dir / "missing"), doctest::Contains("missing.manifest"));
  std::filesystem::remove_all(dir);
}
