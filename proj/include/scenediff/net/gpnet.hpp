#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scenediff/data/interaction.hpp"
#include "scenediff/diffusion/sampler.hpp"
#include "scenediff/grad/graph.hpp"
#include "scenediff/grad/param_store.hpp"

namespace scenediff::net {

using grad::DenseArray;
using grad::Graph;
using grad::NodeId;
using grad::ParamStore;
using grad::Shape;
using geometry::PointCloud;
using geometry::Vec3;

struct HyperParams {
  std::size_t points = 256;      // N
  std::size_t max_objects = 8;   // M
  std::size_t d_embed = 16;      // token embedding width
  std::size_t d_text = 16;
  std::size_t d_encoder = 16;    // point encoder hidden width
  std::size_t d_v = 16;
  std::size_t d_f = 16;
  std::size_t d_time = 8;
  std::size_t d_latent = 3;      // denoiser latent width, >= 3
  std::size_t d_hidden = 32;     // denoiser MLP width
  std::size_t attention_layers = 1;
  std::size_t heads = 4;
  int steps = 100;               // T
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;

  /// Full-scale widths.
  static HyperParams large();
  /// Widths small enough to train on one CPU core.
  static HyperParams desk();

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class Ablation { Full, NoV, NoF, ObjectsOnly, HumanOnly, NoText };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& name);
inline constexpr Ablation kAblations[] = {Ablation::Full,        Ablation::NoV,       Ablation::NoF,
                                          Ablation::ObjectsOnly, Ablation::HumanOnly, Ablation::NoText};

/// Closed grammar vocabulary plus one trailing unknown token.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size() + 1; }
  std::size_t unknown_index() const { return words_.size(); }
  std::size_t index(const std::string& token) const;
  const std::vector<std::string>& words() const { return words_; }

  /// Normalized token counts, shape [1, size()]. Throws std::invalid_argument
  /// for a prompt with no tokens.
  DenseArray bag(const std::string& prompt, std::vector<std::string>* unknown = nullptr) const;

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> lookup_;
};

/// Rigid map from world coordinates into the network frame: origin at the
/// human centroid, speaker forward along +y.
struct SceneFrame {
  Vec3 origin = Vec3::Zero();
  double yaw = 0.0;  // speaker forward heading in world

  static SceneFrame of(const data::Interaction& scene);
  Vec3 to_local(const Vec3& world) const;
  Vec3 to_world(const Vec3& local) const;
  PointCloud to_local(const PointCloud& cloud) const;
  PointCloud to_world(const PointCloud& cloud) const;
};

/// Picks `count` points by even index stride (repeating when the cloud is
/// smaller).
PointCloud resample(const PointCloud& cloud, std::size_t count);

/// Network inputs for one scene.
struct Conditioning {
  SceneFrame frame;
  DenseArray entities;  // [M+1, N, 3], local frame, human first
  DenseArray tokens;    // [1, V]
  std::vector<std::string> unknown_tokens;
};

Conditioning make_conditioning(const data::Interaction& scene, const std::string& prompt, const Vocabulary& vocab,
                               std::size_t points);

/// Sinusoidal features of the 1-based timestep, shape [1, width].
DenseArray time_features(int t, std::size_t width);

void init_params(ParamStore& params, const HyperParams& hp, std::size_t vocab_size);

// Graph builders. Each reads its parameters from `params` by name.

struct EncodedConditions {
  NodeId q;       // [M+1, N, 3]
  NodeId text;    // [1, d_text]
  NodeId pooled;  // [M+1, d_encoder], mean hidden features of the centered clouds
};

/// `entities` is [M+1, N, 3]; `tokens` is [1, V].
EncodedConditions encode_conditions(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId entities,
                                    NodeId tokens, Ablation ablation);

struct Translations {
  NodeId w;  // [1, M+1]
  NodeId v;  // [M+1, 3]
  NodeId z;  // [M+1, d_v]
};

/// Queries and values come from `pooled`, so w and v do not depend on where
/// the entities are. Position enters later through S_bar = F Q.
Translations attend_translations(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId text,
                                 NodeId pooled, Ablation ablation);

/// [M+1, N, 12] from the centered q. Under NoF every row is the identity rotation with v_i as
/// translation.
NodeId attend_transforms(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId v, NodeId q,
                         Ablation ablation);

struct Composition {
  NodeId s_bar;    // [M+1, N, 3]
  NodeId s_tilde;  // [N, 3]
};

Composition compose_guiding_points(Graph& g, NodeId f, NodeId clouds, NodeId w);

/// `time` is [1, d_time] from time_features.
NodeId denoise_step(Graph& g, const ParamStore& params, const HyperParams& hp, NodeId x_t, NodeId time,
                    NodeId s_tilde);

/// Mean over points of the squared distance between prediction and target.
NodeId x0_loss(Graph& g, NodeId x0_hat, NodeId x0);

struct NetworkNodes {
  EncodedConditions enc;
  Translations trans;
  NodeId f = 0;
  Composition comp;
  NodeId x0_hat = 0;
  NodeId loss = 0;
};

/// Whole network for M+1 entities. Inputs: "entities", "tokens", "x_t",
/// "time" and, when `with_loss`, "x0".
NetworkNodes build_network(Graph& g, const ParamStore& params, const HyperParams& hp, std::size_t entity_count,
                           Ablation ablation, bool with_loss);

struct GuidingPointsResult {
  std::vector<double> w;
  DenseArray v;        // [M+1, 3]
  DenseArray f;        // [M+1, N, 12]
  DenseArray s_bar;    // [M+1, N, 3]
  DenseArray s_tilde;  // [N, 3]
};

/// Parameters plus the settings needed to run them.
class GuidingPointsNet {
 public:
  GuidingPointsNet(HyperParams hp, Ablation ablation, std::uint64_t seed);
  GuidingPointsNet(HyperParams hp, Ablation ablation, ParamStore params);

  const HyperParams& hyper() const { return hp_; }
  Ablation ablation() const { return ablation_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  /// Graph with loss for `entity_count` entities.
  const Graph& training_graph(std::size_t entity_count) const;
  const NetworkNodes& training_nodes(std::size_t entity_count) const;

  GuidingPointsResult guide(const Conditioning& cond) const;
  /// Binds the conditioning's guiding points; the result works in the local
  /// frame.
  diffusion::Denoiser denoiser(const Conditioning& cond) const;
  diffusion::Denoiser denoiser(const DenseArray& s_tilde) const;

 private:
  struct GuideGraph {
    Graph graph;
    NodeId w = 0, v = 0, f = 0, s_bar = 0, s_tilde = 0;
  };

  void build_graphs();
  std::size_t slot(std::size_t entity_count) const;

  HyperParams hp_;
  Ablation ablation_;
  Vocabulary vocab_;
  ParamStore params_;
  std::vector<Graph> train_graphs_;
  std::vector<NetworkNodes> train_nodes_;
  std::vector<GuideGraph> guide_graphs_;
  Graph denoise_graph_;
  NodeId denoise_out_ = 0;
};

}  // namespace scenediff::net
