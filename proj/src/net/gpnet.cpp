#include "scenediff/net/gpnet.hpp"

#include <cmath>
#include <stdexcept>

#include "scenediff/data/grammar.hpp"

namespace scenediff::net {

namespace {

constexpr double kMasked = -1e4;

NodeId linear(Graph& g, const ParamStore& params, NodeId x, const std::string& w, const std::string& b) {
  const NodeId y = g.matmul(x, g.param(params, w));
  if (b.empty()) return y;
  return g.add(y, g.broadcast(g.param(params, b), g.shape(y)));
}

// gelu(x W1 + b1) W2 + b2
NodeId mlp(Graph& g, const ParamStore& params, NodeId x, const std::string& prefix) {
  const NodeId h = g.gelu(linear(g, params, x, prefix + ".w1", prefix + ".b1"));
  return linear(g, params, h, prefix + ".w2", prefix + ".b2");
}

// [width, heads] block indicator: column h sums the h-th slice of width/heads.
DenseArray head_sum(std::size_t width, std::size_t heads) {
  DenseArray m({width, heads});
  const std::size_t dh = width / heads;
  for (std::size_t i = 0; i < width; ++i) m.at(i, i / dh) = 1.0;
  return m;
}

DenseArray head_expand(std::size_t width, std::size_t heads) {
  DenseArray m({heads, width});
  const std::size_t dh = width / heads;
  for (std::size_t i = 0; i < width; ++i) m.at(i / dh, i) = 1.0;
  return m;
}

// Additive score mask over entities, shape [E, cols].
DenseArray entity_mask(std::size_t entities, std::size_t cols, Ablation ablation) {
  DenseArray m({entities, cols});
  std::size_t open = 0;
  for (std::size_t e = 0; e < entities; ++e) {
    const bool masked = (ablation == Ablation::ObjectsOnly && e == 0) || (ablation == Ablation::HumanOnly && e > 0);
    if (!masked) ++open;
    for (std::size_t c = 0; c < cols; ++c) m.at(e, c) = masked ? kMasked : 0.0;
  }
  if (open == 0) throw std::invalid_argument(to_string(ablation) + ": every entity is masked");
  return m;
}

bool masks_entities(Ablation a) { return a == Ablation::ObjectsOnly || a == Ablation::HumanOnly; }

void encoder_params(ParamStore& p, const std::string& prefix, std::size_t hidden) {
  p.create(prefix + ".w1", {3, hidden}, 3);
  p.create(prefix + ".b1", {hidden}, 3);
  p.create(prefix + ".w2", {hidden, 3}, hidden);
  p.create_filled(prefix + ".b2", {3}, 0.0);
}

void mlp_params(ParamStore& p, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out) {
  p.create(prefix + ".w1", {in, hidden}, in);
  p.create(prefix + ".b1", {hidden}, in);
  p.create(prefix + ".w2", {hidden, out}, hidden);
  p.create_filled(prefix + ".b2", {out}, 0.0);
}

// [in, out] with ones on the leading diagonal.
DenseArray embedding_identity(std::size_t in, std::size_t out) {
  DenseArray m({in, out});
  for (std::size_t i = 0; i < std::min<std::size_t>({in, out, 3}); ++i) m.at(i, i) = 1.0;
  return m;
}

NodeId centered(Graph& g, NodeId clouds) {
  return g.sub(clouds, g.repeat(g.mean(clouds, 1), 1, g.shape(clouds)[1]));
}

struct PointFeatures {
  NodeId q;       // [E, N, 3]
  NodeId pooled;  // [E, hidden]
};

// Hidden features see centered points only, so a moved entity keeps its
// features and q moves with it.
PointFeatures point_encoder(Graph& g, const ParamStore& params, NodeId clouds, const std::string& prefix) {
  const Shape s = g.shape(clouds);
  const NodeId h = g.gelu(linear(g, params, centered(g, clouds), prefix + ".w1", prefix + ".b1"));
  const NodeId pooled = g.mean(h, 1);
  const NodeId ctx = g.repeat(pooled, 1, s[1]);
  const NodeId out = linear(g, params, g.add(h, ctx), prefix + ".w2", prefix + ".b2");
  return {g.add(clouds, out), pooled};
}

}  // namespace

HyperParams HyperParams::large() {
  HyperParams hp;
  hp.points = 1024;
  hp.d_embed = 128;
  hp.d_text = 128;
  hp.d_encoder = 64;
  hp.d_v = 32;
  hp.d_f = 128;
  hp.d_time = 32;
  hp.d_latent = 3;
  hp.d_hidden = 128;
  hp.attention_layers = 12;
  hp.heads = 8;
  hp.steps = 1000;
  return hp;
}

HyperParams HyperParams::desk() { return HyperParams{}; }

void HyperParams::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(points, "points");
  positive(d_embed, "d_embed");
  positive(d_text, "d_text");
  positive(d_encoder, "d_encoder");
  positive(d_v, "d_v");
  positive(d_f, "d_f");
  positive(d_time, "d_time");
  positive(d_hidden, "d_hidden");
  positive(attention_layers, "attention_layers");
  positive(heads, "heads");
  positive(batch_size, "batch_size");
  if (d_latent < 3) throw std::invalid_argument("d_latent must be at least 3");
  if (steps <= 0) throw std::invalid_argument("steps must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (d_v % heads != 0) throw std::invalid_argument("heads must divide d_v");
  if (d_f % heads != 0) throw std::invalid_argument("heads must divide d_f");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoV: return "no_v";
    case Ablation::NoF: return "no_F";
    case Ablation::ObjectsOnly: return "objects_only";
    case Ablation::HumanOnly: return "human_only";
    case Ablation::NoText: return "no_text";
  }
  return "?";
}

Ablation parse_ablation(const std::string& name) {
  for (Ablation a : kAblations) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown ablation '" + name + "'");
}

Vocabulary::Vocabulary() : Vocabulary(data::grammar_vocabulary()) {}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) lookup_.emplace(words_[i], i);
}

std::size_t Vocabulary::index(const std::string& token) const {
  const auto it = lookup_.find(token);
  return it == lookup_.end() ? unknown_index() : it->second;
}

DenseArray Vocabulary::bag(const std::string& prompt, std::vector<std::string>* unknown) const {
  const auto tokens = data::tokenize(prompt);
  if (tokens.empty()) throw std::invalid_argument("prompt has no tokens");
  DenseArray out({1, size()});
  for (const auto& t : tokens) {
    const std::size_t i = index(t);
    if (i == unknown_index() && unknown) unknown->push_back(t);
    out.at(0, i) += 1.0 / static_cast<double>(tokens.size());
  }
  return out;
}

SceneFrame SceneFrame::of(const data::Interaction& scene) {
  const auto frame = data::speaker_frame(scene.human().solid);
  return SceneFrame{scene.human().cloud.centroid(), std::atan2(frame.forward.y(), frame.forward.x())};
}

Vec3 SceneFrame::to_local(const Vec3& world) const {
  return geometry::rotation_z(M_PI / 2 - yaw) * (world - origin);
}

Vec3 SceneFrame::to_world(const Vec3& local) const {
  return geometry::rotation_z(yaw - M_PI / 2) * local + origin;
}

PointCloud SceneFrame::to_local(const PointCloud& cloud) const {
  PointCloud out;
  for (const auto& p : cloud) out.push_back(to_local(p));
  return out;
}

PointCloud SceneFrame::to_world(const PointCloud& cloud) const {
  PointCloud out;
  for (const auto& p : cloud) out.push_back(to_world(p));
  return out;
}

PointCloud resample(const PointCloud& cloud, std::size_t count) {
  if (cloud.empty()) throw std::invalid_argument("resample: empty cloud");
  if (cloud.size() == count) return cloud;
  PointCloud out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(cloud[i * cloud.size() / count]);
  return out;
}

Conditioning make_conditioning(const data::Interaction& scene, const std::string& prompt, const Vocabulary& vocab,
                               std::size_t points) {
  Conditioning c;
  c.frame = SceneFrame::of(scene);
  c.tokens = vocab.bag(prompt, &c.unknown_tokens);
  c.entities = DenseArray({scene.entities.size(), points, 3});
  for (std::size_t e = 0; e < scene.entities.size(); ++e) {
    const PointCloud local = c.frame.to_local(resample(scene.entities[e].cloud, points));
    for (std::size_t j = 0; j < points; ++j) {
      for (int k = 0; k < 3; ++k) c.entities.at(e, j, static_cast<std::size_t>(k)) = local[j][k];
    }
  }
  return c;
}

DenseArray time_features(int t, std::size_t width) {
  DenseArray out({1, width});
  const std::size_t half = (width + 1) / 2;
  for (std::size_t i = 0; i < width; ++i) {
    const std::size_t k = i % half;
    const double freq = std::pow(1000.0, -static_cast<double>(k) / static_cast<double>(half));
    const double arg = static_cast<double>(t) * freq;
    out.at(0, i) = i < half ? std::sin(arg) : std::cos(arg);
  }
  return out;
}

void init_params(ParamStore& p, const HyperParams& hp, std::size_t vocab_size) {
  hp.validate();
  p.create("text.embed", {vocab_size, hp.d_embed}, 1);
  p.create("text.w", {hp.d_embed, hp.d_text}, hp.d_embed);
  p.create_filled("text.b", {hp.d_text}, 0.0);
  p.create("text.null", {1, hp.d_text}, 1);

  encoder_params(p, "enc.human", hp.d_encoder);
  encoder_params(p, "enc.object", hp.d_encoder);

  p.create("trans.wq", {hp.d_encoder, hp.d_v}, hp.d_encoder);
  p.create("trans.wk", {hp.d_text, hp.d_v}, hp.d_text);
  p.create("trans.wv", {hp.d_encoder, hp.d_v}, hp.d_encoder);
  p.create("trans.wo", {hp.d_v, hp.d_v}, hp.d_v);
  mlp_params(p, "trans.out", hp.d_text + hp.d_v, hp.d_v, 3);

  p.create("xf.win", {3, hp.d_f}, 3);
  for (std::size_t l = 0; l < hp.attention_layers; ++l) {
    const std::string pre = "xf.l" + std::to_string(l);
    p.create(pre + ".wq", {3, hp.d_f}, 3);
    p.create(pre + ".wk", {hp.d_f, hp.d_f}, hp.d_f);
    p.create(pre + ".wv", {hp.d_f, hp.d_f}, hp.d_f);
    p.create(pre + ".wo", {hp.d_f, hp.d_f}, hp.d_f);
  }
  auto& out_w = p.create("xf.out.w", {hp.d_f + 3, 12}, hp.d_f * 100);
  for (std::size_t k = 0; k < 3; ++k) out_w.at(hp.d_f + k, 9 + k) = 1.0;
  const auto id = geometry::identity_row();
  p.set("xf.out.b", DenseArray({12}, std::vector<double>(id.begin(), id.end())));

  p.create("den.time.w", {hp.d_time, hp.d_time}, hp.d_time);
  p.create_filled("den.time.b", {hp.d_time}, 0.0);
  p.set("den.l1.skip", embedding_identity(3 + hp.d_time, hp.d_latent));
  mlp_params(p, "den.l1", 3 + hp.d_time, hp.d_hidden, hp.d_latent);
  p.set("den.out.w", embedding_identity(hp.d_latent, 3));
  p.create_filled("den.out.b", {3}, 0.0);
}

EncodedConditions encode_conditions(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId entities,
                                    NodeId tokens, Ablation ablation) {
  const Shape s = g.shape(entities);
  if (s.size() != 3 || s[2] != 3 || s[0] == 0) throw grad::ShapeError("encode_conditions: entities must be [M+1, N, 3]");
  (void)hp;
  PointFeatures f = point_encoder(g, params, g.slice(entities, 0, 0, 1), "enc.human");
  if (s[0] > 1) {
    const PointFeatures objects = point_encoder(g, params, g.slice(entities, 0, 1, s[0]), "enc.object");
    f.q = g.concat({f.q, objects.q}, 0);
    f.pooled = g.concat({f.pooled, objects.pooled}, 0);
  }
  NodeId text;
  if (ablation == Ablation::NoText) {
    text = g.param(params, "text.null");
  } else {
    const NodeId e = g.matmul(tokens, g.param(params, "text.embed"));
    text = g.layer_norm(linear(g, params, e, "text.w", "text.b"));
  }
  return {f.q, text, f.pooled};
}

Translations attend_translations(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId text,
                                 NodeId pooled, Ablation ablation) {
  const std::size_t entities = g.shape(pooled)[0];
  const std::size_t dh = hp.d_v / hp.heads;
  const NodeId query = g.matmul(pooled, g.param(params, "trans.wq"));
  const NodeId key = g.broadcast(g.matmul(text, g.param(params, "trans.wk")), {entities, hp.d_v});
  const NodeId value = g.matmul(pooled, g.param(params, "trans.wv"));

  NodeId scores = g.scale(g.matmul(g.mul(query, key), g.constant(head_sum(hp.d_v, hp.heads))),
                          1.0 / std::sqrt(static_cast<double>(dh)));  // [E, heads]
  if (masks_entities(ablation)) scores = g.add(scores, g.constant(entity_mask(entities, hp.heads, ablation)));

  const NodeId attn = g.transpose(g.softmax(g.transpose(scores)));  // per head over entities
  const NodeId spread = g.matmul(attn, g.constant(head_expand(hp.d_v, hp.heads)));
  const NodeId z = g.matmul(g.mul(spread, value), g.param(params, "trans.wo"));

  DenseArray head_mean({hp.heads, 1}, 1.0 / static_cast<double>(hp.heads));
  const NodeId w = g.softmax(g.transpose(g.matmul(scores, g.constant(std::move(head_mean)))));

  const NodeId text_rows = g.broadcast(text, {entities, hp.d_text});
  const NodeId v = mlp(g, params, g.concat({text_rows, z}, 1), "trans.out");
  return {w, v, z};
}

NodeId attend_transforms(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId v, NodeId q,
                         Ablation ablation) {
  const Shape s = g.shape(q);
  const std::size_t entities = s[0];
  const std::size_t n = s[1];
  if (ablation == Ablation::NoF) {
    const auto id = geometry::identity_row();
    DenseArray rot({entities, n, 9});
    for (std::size_t i = 0; i < entities * n; ++i) {
      for (std::size_t k = 0; k < 9; ++k) rot[i * 9 + k] = id[k];
    }
    return g.concat({g.constant(std::move(rot)), g.repeat(v, 1, n)}, 2);
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hp.d_f / hp.heads));
  const NodeId sum_heads = g.constant(head_sum(hp.d_f, hp.heads));
  const NodeId expand_heads = g.constant(head_expand(hp.d_f, hp.heads));
  NodeId h = g.matmul(centered(g, q), g.param(params, "xf.win"));  // [E, N, d_f]
  for (std::size_t l = 0; l < hp.attention_layers; ++l) {
    const std::string pre = "xf.l" + std::to_string(l);
    const NodeId query = g.repeat(g.matmul(v, g.param(params, pre + ".wq")), 1, n);
    const NodeId key = g.matmul(h, g.param(params, pre + ".wk"));
    const NodeId value = g.matmul(h, g.param(params, pre + ".wv"));
    const NodeId scores = g.scale(g.matmul(g.mul(query, key), sum_heads), inv_sqrt);  // [E, N, heads]
    // Softmax over points, rescaled so the mean weight is 1.
    const NodeId attn = g.transpose(g.scale(g.softmax(g.transpose(scores)), static_cast<double>(n)));
    const NodeId mixed = g.mul(g.matmul(attn, expand_heads), value);
    h = g.layer_norm(g.add(h, g.matmul(mixed, g.param(params, pre + ".wo"))));
  }
  // The output layer also sees v_i, so a translation can pass straight through.
  return linear(g, params, g.concat({h, g.repeat(v, 1, n)}, 2), "xf.out.w", "xf.out.b");
}

Composition compose_guiding_points(Graph& g, NodeId f, NodeId clouds, NodeId w) {
  const Shape s = g.shape(clouds);
  const std::size_t entities = s[0];
  const std::size_t n = s[1];
  if (g.shape(f) != Shape{entities, n, 12}) throw grad::ShapeError("compose_guiding_points: F must be [M+1, N, 12]");
  if (g.shape(w) != Shape{1, entities}) throw grad::ShapeError("compose_guiding_points: w must be [1, M+1]");
  std::vector<NodeId> rows;
  for (std::size_t r = 0; r < 3; ++r) {
    const NodeId dot = g.sum(g.mul(g.slice(f, 2, 3 * r, 3 * r + 3), clouds), 2);
    const NodeId shift = g.reshape(g.slice(f, 2, 9 + r, 10 + r), {entities, n});
    rows.push_back(g.reshape(g.add(dot, shift), {entities, n, 1}));
  }
  const NodeId s_bar = g.concat(rows, 2);
  const NodeId s_tilde = g.reshape(g.matmul(w, g.reshape(s_bar, {entities, n * 3})), {n, 3});
  return {s_bar, s_tilde};
}

NodeId denoise_step(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId x_t, NodeId time,
                    NodeId s_tilde) {
  const std::size_t n = g.shape(x_t)[0];
  const NodeId tp = linear(g, params, time, "den.time.w", "den.time.b");
  const NodeId t_rows = g.repeat(g.reshape(tp, {hp.d_time}), 0, n);
  const NodeId h = g.concat({x_t, t_rows}, 1);
  const NodeId x1 = g.add(g.matmul(h, g.param(params, "den.l1.skip")), mlp(g, params, h, "den.l1"));
  NodeId guide = s_tilde;
  if (hp.d_latent > 3) guide = g.concat({s_tilde, g.constant(DenseArray({n, hp.d_latent - 3}))}, 1);
  const NodeId x2 = g.add(x1, guide);
  return linear(g, params, x2, "den.out.w", "den.out.b");
}

NodeId x0_loss(Graph& g, NodeId x0_hat, NodeId x0) {
  const NodeId d = g.sub(x0_hat, x0);
  return g.scale(g.mean(g.mul(d, d)), 3.0);
}

NetworkNodes build_network(Graph& g, const ParamStore& params, const HyperParams& hp, std::size_t entity_count,
                           Ablation ablation, bool with_loss) {
  const std::size_t n = hp.points;
  const NodeId entities = g.input("entities", {entity_count, n, 3});
  const NodeId tokens = g.input("tokens", {1, params.get("text.embed").dim(0)});
  const NodeId x_t = g.input("x_t", {n, 3});
  const NodeId time = g.input("time", {1, hp.d_time});

  NetworkNodes out;
  out.enc = encode_conditions(g, params, hp, entities, tokens, ablation);
  out.trans = attend_translations(g, params, hp, out.enc.text, out.enc.pooled, ablation);
  out.f = attend_transforms(g, params, hp, out.trans.v, out.enc.q, ablation);
  out.comp = compose_guiding_points(g, out.f, entities, out.trans.w);
  const NodeId guide = ablation == Ablation::NoV ? g.constant(DenseArray({n, 3})) : out.comp.s_tilde;
  out.x0_hat = denoise_step(g, params, hp, x_t, time, guide);
  if (with_loss) out.loss = x0_loss(g, out.x0_hat, g.input("x0", {n, 3}));
  return out;
}

GuidingPointsNet::GuidingPointsNet(HyperParams hp, Ablation ablation, std::uint64_t seed)
    : hp_(hp), ablation_(ablation), params_(seed) {
  init_params(params_, hp_, vocab_.size());
  build_graphs();
}

GuidingPointsNet::GuidingPointsNet(HyperParams hp, Ablation ablation, ParamStore params)
    : hp_(hp), ablation_(ablation), params_(std::move(params)) {
  hp_.validate();
  ParamStore reference(0);
  init_params(reference, hp_, vocab_.size());
  for (const auto& [name, value] : reference.arrays()) {
    if (!params_.contains(name)) throw std::invalid_argument("missing parameter '" + name + "'");
    if (params_.get(name).shape() != value.shape()) {
      throw std::invalid_argument("parameter '" + name + "' has shape " + grad::to_string(params_.get(name).shape()) +
                                  ", expected " + grad::to_string(value.shape()));
    }
  }
  build_graphs();
}

void GuidingPointsNet::build_graphs() {
  const std::size_t n = hp_.points;
  for (std::size_t e = 1; e <= hp_.max_objects + 1; ++e) {
    Graph g;
    NetworkNodes nodes;
    GuideGraph gg;
    const bool ok = !(ablation_ == Ablation::ObjectsOnly && e == 1);
    if (ok) {
      nodes = build_network(g, params_, hp_, e, ablation_, true);
      g.mark_output("loss", nodes.loss);

      const NodeId entities = gg.graph.input("entities", {e, n, 3});
      const NodeId tokens = gg.graph.input("tokens", {1, vocab_.size()});
      const auto enc = encode_conditions(gg.graph, params_, hp_, entities, tokens, ablation_);
      const auto tr = attend_translations(gg.graph, params_, hp_, enc.text, enc.pooled, ablation_);
      gg.f = attend_transforms(gg.graph, params_, hp_, tr.v, enc.q, ablation_);
      const auto comp = compose_guiding_points(gg.graph, gg.f, entities, tr.w);
      gg.w = tr.w;
      gg.v = tr.v;
      gg.s_bar = comp.s_bar;
      gg.s_tilde = comp.s_tilde;
    }
    train_graphs_.push_back(std::move(g));
    train_nodes_.push_back(nodes);
    guide_graphs_.push_back(std::move(gg));
  }
  const NodeId x_t = denoise_graph_.input("x_t", {n, 3});
  const NodeId time = denoise_graph_.input("time", {1, hp_.d_time});
  const NodeId guide = denoise_graph_.input("s_tilde", {n, 3});
  denoise_out_ = denoise_step(denoise_graph_, params_, hp_, x_t, time, guide);
}

std::size_t GuidingPointsNet::slot(std::size_t entity_count) const {
  if (entity_count == 0 || entity_count > hp_.max_objects + 1) {
    throw std::invalid_argument("scene has " + std::to_string(entity_count) + " entities; the model supports 1.." +
                                std::to_string(hp_.max_objects + 1));
  }
  if (ablation_ == Ablation::ObjectsOnly && entity_count == 1) {
    throw std::invalid_argument("objects_only needs at least one object");
  }
  return entity_count - 1;
}

const Graph& GuidingPointsNet::training_graph(std::size_t entity_count) const {
  return train_graphs_[slot(entity_count)];
}

const NetworkNodes& GuidingPointsNet::training_nodes(std::size_t entity_count) const {
  return train_nodes_[slot(entity_count)];
}

GuidingPointsResult GuidingPointsNet::guide(const Conditioning& cond) const {
  const GuideGraph& gg = guide_graphs_[slot(cond.entities.dim(0))];
  const auto trace = grad::forward(gg.graph, {{"entities", cond.entities}, {"tokens", cond.tokens}}, params_);
  GuidingPointsResult r;
  const auto w = trace[gg.w].values();
  r.w.assign(w.begin(), w.end());
  r.v = trace[gg.v];
  r.f = trace[gg.f];
  r.s_bar = trace[gg.s_bar];
  r.s_tilde = ablation_ == Ablation::NoV ? DenseArray({hp_.points, 3}) : trace[gg.s_tilde];
  return r;
}

diffusion::Denoiser GuidingPointsNet::denoiser(const Conditioning& cond) const { return denoiser(guide(cond).s_tilde); }

diffusion::Denoiser GuidingPointsNet::denoiser(const DenseArray& s_tilde) const {
  return [this, s_tilde](const DenseArray& x_t, int t) {
    grad::Bindings b{{"x_t", x_t}, {"time", time_features(t + 1, hp_.d_time)}, {"s_tilde", s_tilde}};
    const auto trace = grad::forward(denoise_graph_, b, params_);
    return trace[denoise_out_];
  };
}

}  // namespace scenediff::net
