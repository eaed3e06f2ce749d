#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenediff/data/interaction.hpp"
#include "scenediff/diffusion/schedule.hpp"
#include "scenediff/metrics/metrics.hpp"
#include "scenediff/net/gpnet.hpp"

namespace scenediff::train {

using net::Ablation;
using net::GuidingPointsNet;
using net::HyperParams;
using geometry::PointCloud;

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  HyperParams hp = HyperParams::desk();
  Ablation ablation = Ablation::Full;
  int epochs = 200;
  /// Stop after this many optimizer updates; 0 runs every epoch to the end.
  std::size_t max_updates = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Cosine;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double seconds = 0.0;
  std::optional<double> guiding_mse;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  /// Loss of every optimizer update (batch mean).
  std::vector<double> update_losses;
  std::vector<std::string> checkpoints;
};

/// Writes one JSON object per epoch.
void write_log(const std::filesystem::path& path, const TrainLog& log);

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(grad::ParamStore& params, const grad::GradientMap& gradients);
  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, grad::DenseArray> m_, v_;
};

/// Conditioning and local-frame target of one interaction.
struct Sample {
  net::Conditioning cond;
  grad::DenseArray x0;  // [N, 3]
};

Sample make_sample(const data::Interaction& scene, const net::Vocabulary& vocab, std::size_t points);

struct TrainResult {
  GuidingPointsNet net;
  TrainLog log;
};

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&, const GuidingPointsNet&)>;

/// Each update draws `batch_size` samples (shuffled per epoch), a uniform
/// timestep and fresh noise for each, and applies the mean gradient. When
/// `held_out` is non-empty every epoch records its mean guiding_mse.
TrainResult train(const std::vector<data::Interaction>& dataset, const TrainConfig& config,
                  const std::vector<data::Interaction>& held_out = {}, const EpochCallback& on_epoch = {});

/// Loss of one sample at timestep t with the given noise.
double sample_loss(const GuidingPointsNet& net, const Sample& sample, const diffusion::NoiseSchedule& schedule, int t,
                   const grad::DenseArray& noise);

/// Mean sample_loss over `draws` (t, noise) pairs fixed by `seed`.
double expected_loss(const GuidingPointsNet& net, const Sample& sample, const diffusion::NoiseSchedule& schedule,
                     std::size_t draws, std::uint64_t seed);

/// Mean guiding_mse of the model's guiding points against each target centroid.
double mean_guiding_mse(const GuidingPointsNet& net, const std::vector<data::Interaction>& split);

/// Trains on one sample repeatedly for `updates` single-sample updates.
TrainResult overfit(const data::Interaction& scene, const TrainConfig& config, std::size_t updates);

std::map<std::string, std::string> to_meta(const HyperParams& hp, Ablation ablation);
std::pair<HyperParams, Ablation> from_meta(const std::map<std::string, std::string>& meta);

void save_model(const std::filesystem::path& stem, const GuidingPointsNet& net,
                std::map<std::string, std::string> extra = {});
/// Throws TrainError naming the path when the checkpoint is missing or does
/// not fit the recorded hyperparameters.
GuidingPointsNet load_model(const std::filesystem::path& stem);

struct SampleRecord {
  std::string id;
  metrics::MetricReport report;
  PointCloud generated;  // world frame
  PointCloud guiding;    // world frame
  std::vector<double> w;
};

struct EvalReport {
  metrics::MetricReport mean;
  std::vector<SampleRecord> samples;
};

struct EvalOptions {
  std::uint64_t seed = 1234;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Cosine;
  metrics::EmdMode emd = metrics::EmdMode::Auto;
};

/// A source of generated target clouds (world frame) for evaluation.
struct Generation {
  PointCloud points;
  PointCloud guiding;
  std::vector<double> w;
};
using Generator = std::function<Generation(const data::Interaction& scene, std::size_t index)>;

/// Samples the model per interaction with a seed derived from `options.seed`
/// and the index.
Generator model_generator(const GuidingPointsNet& net, const EvalOptions& options);

/// Generated cloud vs the ground-truth target for each interaction.
EvalReport evaluate(const Generator& generate, const std::vector<data::Interaction>& split,
                    const EvalOptions& options = {});
EvalReport evaluate(const GuidingPointsNet& net, const std::vector<data::Interaction>& split,
                    const EvalOptions& options = {});

/// Samples the model for one scene and prompt (world frame output).
Generation synthesize(const GuidingPointsNet& net, const data::Interaction& scene, const std::string& prompt,
                      std::uint64_t seed, diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Cosine);

struct AblationRow {
  std::string variant;  // ablation name, or "N=<n>"
  std::uint64_t seed = 0;
  metrics::MetricReport report;
  double final_loss = 0.0;
};

struct MatrixOptions {
  std::vector<Ablation> ablations{std::begin(net::kAblations), std::end(net::kAblations)};
  std::vector<std::size_t> point_counts{64, 128, 256};
  std::vector<std::uint64_t> seeds{0};
  EvalOptions eval;
};

std::vector<AblationRow> run_ablation_matrix(const std::vector<data::Interaction>& train_set,
                                             const std::vector<data::Interaction>& test_set, const TrainConfig& base,
                                             const MatrixOptions& options);

std::string matrix_csv(const std::vector<AblationRow>& rows);
std::string matrix_markdown(const std::vector<AblationRow>& rows);

}  // namespace scenediff::train
