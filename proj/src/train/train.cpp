#include "scenediff/train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "scenediff/diffusion/sampler.hpp"
#include "scenediff/grad/checkpoint.hpp"

namespace scenediff::train {

namespace {

grad::DenseArray normal_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  grad::DenseArray a({n, 3});
  for (double& v : a.values()) v = d(rng);
  return a;
}

grad::Bindings bindings(const Sample& s, const grad::DenseArray& x_t, int t, std::size_t d_time) {
  return {{"entities", s.cond.entities},
          {"tokens", s.cond.tokens},
          {"x_t", x_t},
          {"time", net::time_features(t + 1, d_time)},
          {"x0", s.x0}};
}

void accumulate(grad::GradientMap& total, const grad::GradientMap& g) {
  for (const auto& [name, value] : g) {
    auto it = total.find(name);
    if (it == total.end()) {
      total.emplace(name, value);
      continue;
    }
    auto dst = it->second.values();
    auto src = value.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PointCloud array_cloud(const grad::DenseArray& a) { return PointCloud::from_array(a); }

struct Trainer {
  const TrainConfig& config;
  GuidingPointsNet net;
  Adam adam;
  diffusion::NoiseSchedule schedule;
  std::mt19937_64 rng;
  TrainLog log;

  explicit Trainer(const TrainConfig& c)
      : config(c),
        net(c.hp, c.ablation, c.seed),
        adam(c.hp.learning_rate, c.beta1, c.beta2, c.epsilon),
        schedule(diffusion::make_schedule(c.schedule, c.hp.steps)),
        rng(mix_seed(c.seed, 0xda7a)) {}

  // One update over `batch`; returns the batch mean loss.
  double update(const std::vector<const Sample*>& batch) {
    grad::GradientMap total;
    double loss_sum = 0.0;
    std::uniform_int_distribution<int> pick_t(0, schedule.steps() - 1);
    for (const Sample* s : batch) {
      const int t = pick_t(rng);
      const auto noise = normal_noise(config.hp.points, rng);
      const auto x_t = diffusion::q_sample(s->x0, t, noise, schedule);
      const std::size_t e = s->cond.entities.dim(0);
      const grad::Graph& g = net.training_graph(e);
      const grad::NodeId loss = net.training_nodes(e).loss;
      grad::Trace trace;
      try {
        trace = grad::forward(g, bindings(*s, x_t, t, config.hp.d_time), net.params());
      } catch (const grad::NumericError& err) {
        throw TrainError("non-finite value at update " + std::to_string(adam.steps() + 1) + ": " + err.what());
      }
      const double value = trace[loss].item();
      if (!std::isfinite(value)) throw TrainError("non-finite loss at update " + std::to_string(adam.steps() + 1));
      loss_sum += value;
      accumulate(total, grad::backward(g, trace, loss));
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto& [_, value] : total) {
      for (double& v : value.values()) v *= scale;
    }
    adam.step(net.params(), total);
    const double mean = loss_sum * scale;
    log.update_losses.push_back(mean);
    return mean;
  }

  bool budget_left() const { return config.max_updates == 0 || adam.steps() < config.max_updates; }
};

}  // namespace

void TrainConfig::validate() const {
  hp.validate();
  if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

void write_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw TrainError("cannot write " + path.string());
  for (const auto& e : log.epochs) {
    nlohmann::json j{{"epoch", e.epoch}, {"loss", e.loss}, {"seconds", e.seconds}};
    j["guiding_mse"] = e.guiding_mse ? nlohmann::json(*e.guiding_mse) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
  }
  if (!log.checkpoints.empty()) out << nlohmann::json{{"checkpoints", log.checkpoints}}.dump() << '\n';
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon) {}

void Adam::step(grad::ParamStore& params, const grad::GradientMap& gradients) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (const auto& [name, g] : gradients) {
    auto& m = m_.try_emplace(name, g.shape()).first->second;
    auto& v = v_.try_emplace(name, g.shape()).first->second;
    auto p = params.get_mut(name).values();
    auto gv = g.values();
    auto mv = m.values();
    auto vv = v.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      mv[i] = b1_ * mv[i] + (1.0 - b1_) * gv[i];
      vv[i] = b2_ * vv[i] + (1.0 - b2_) * gv[i] * gv[i];
      p[i] -= lr_ * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + eps_);
    }
  }
}

Sample make_sample(const data::Interaction& scene, const net::Vocabulary& vocab, std::size_t points) {
  Sample s;
  s.cond = net::make_conditioning(scene, scene.prompt, vocab, points);
  s.x0 = s.cond.frame.to_local(net::resample(scene.target.cloud, points)).to_array();
  return s;
}

TrainResult train(const std::vector<data::Interaction>& dataset, const TrainConfig& config,
                  const std::vector<data::Interaction>& held_out, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  Trainer tr(config);
  std::vector<Sample> samples;
  samples.reserve(dataset.size());
  for (const auto& scene : dataset) samples.push_back(make_sample(scene, tr.net.vocabulary(), config.hp.points));

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size = config.hp.batch_size;
  for (int epoch = 1; epoch <= config.epochs && tr.budget_left(); ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), tr.rng);
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < order.size() && tr.budget_left(); b += batch_size) {
      std::vector<const Sample*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + batch_size); ++i) batch.push_back(&samples[order[i]]);
      loss_sum += tr.update(batch) * static_cast<double>(batch.size());
      counted += batch.size();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(std::max<std::size_t>(counted, 1));
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!held_out.empty()) rec.guiding_mse = mean_guiding_mse(tr.net, held_out);
    tr.log.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec, tr.net)) break;
  }
  return TrainResult{std::move(tr.net), std::move(tr.log)};
}

double sample_loss(const GuidingPointsNet& net, const Sample& sample, const diffusion::NoiseSchedule& schedule, int t,
                   const grad::DenseArray& noise) {
  const auto x_t = diffusion::q_sample(sample.x0, t, noise, schedule);
  const std::size_t e = sample.cond.entities.dim(0);
  const auto trace =
      grad::forward(net.training_graph(e), bindings(sample, x_t, t, net.hyper().d_time), net.params());
  return trace[net.training_nodes(e).loss].item();
}

double expected_loss(const GuidingPointsNet& net, const Sample& sample, const diffusion::NoiseSchedule& schedule,
                     std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_t(0, schedule.steps() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const int t = pick_t(rng);
    total += sample_loss(net, sample, schedule, t, normal_noise(sample.x0.dim(0), rng));
  }
  return total / static_cast<double>(draws);
}

double mean_guiding_mse(const GuidingPointsNet& net, const std::vector<data::Interaction>& split) {
  if (split.empty()) return 0.0;
  double total = 0.0;
  for (const auto& scene : split) {
    const auto cond = net::make_conditioning(scene, scene.prompt, net.vocabulary(), net.hyper().points);
    const auto guiding = array_cloud(net.guide(cond).s_tilde);
    total += metrics::guiding_mse(guiding, cond.frame.to_local(scene.target.cloud.centroid()));
  }
  return total / static_cast<double>(split.size());
}

TrainResult overfit(const data::Interaction& scene, const TrainConfig& config, std::size_t updates) {
  config.validate();
  Trainer tr(config);
  const Sample s = make_sample(scene, tr.net.vocabulary(), config.hp.points);
  for (std::size_t i = 0; i < updates; ++i) tr.update({&s});
  return TrainResult{std::move(tr.net), std::move(tr.log)};
}

std::map<std::string, std::string> to_meta(const HyperParams& hp, Ablation ablation) {
  auto s = [](auto v) { return std::to_string(v); };
  std::ostringstream lr;
  lr << std::setprecision(17) << hp.learning_rate;
  return {{"points", s(hp.points)},
          {"max_objects", s(hp.max_objects)},
          {"d_embed", s(hp.d_embed)},
          {"d_text", s(hp.d_text)},
          {"d_encoder", s(hp.d_encoder)},
          {"d_v", s(hp.d_v)},
          {"d_f", s(hp.d_f)},
          {"d_time", s(hp.d_time)},
          {"d_latent", s(hp.d_latent)},
          {"d_hidden", s(hp.d_hidden)},
          {"attention_layers", s(hp.attention_layers)},
          {"heads", s(hp.heads)},
          {"steps", s(hp.steps)},
          {"learning_rate", lr.str()},
          {"batch_size", s(hp.batch_size)},
          {"ablation", net::to_string(ablation)}};
}

std::pair<HyperParams, Ablation> from_meta(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) throw TrainError("checkpoint metadata lacks '" + key + "'");
    return it->second;
  };
  auto size = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
  HyperParams hp;
  hp.points = size("points");
  hp.max_objects = size("max_objects");
  hp.d_embed = size("d_embed");
  hp.d_text = size("d_text");
  hp.d_encoder = size("d_encoder");
  hp.d_v = size("d_v");
  hp.d_f = size("d_f");
  hp.d_time = size("d_time");
  hp.d_latent = size("d_latent");
  hp.d_hidden = size("d_hidden");
  hp.attention_layers = size("attention_layers");
  hp.heads = size("heads");
  hp.steps = std::stoi(get("steps"));
  hp.learning_rate = std::stod(get("learning_rate"));
  hp.batch_size = size("batch_size");
  return {hp, net::parse_ablation(get("ablation"))};
}

void save_model(const std::filesystem::path& stem, const GuidingPointsNet& net, std::map<std::string, std::string> extra) {
  auto meta = to_meta(net.hyper(), net.ablation());
  meta.merge(extra);
  grad::save_checkpoint(stem, net.params(), meta);
}

GuidingPointsNet load_model(const std::filesystem::path& stem) {
  if (!std::filesystem::exists(grad::manifest_path(stem))) {
    throw TrainError("checkpoint not found: " + grad::manifest_path(stem).string());
  }
  try {
    auto ck = grad::load_checkpoint(stem);
    auto [hp, ablation] = from_meta(ck.meta);
    return GuidingPointsNet(hp, ablation, std::move(ck.params));
  } catch (const TrainError&) {
    throw;
  } catch (const std::exception& e) {
    throw TrainError("cannot load checkpoint " + stem.string() + ": " + e.what());
  }
}

Generation synthesize(const GuidingPointsNet& net, const data::Interaction& scene, const std::string& prompt,
                      std::uint64_t seed, diffusion::ScheduleKind schedule) {
  const auto cond = net::make_conditioning(scene, prompt, net.vocabulary(), net.hyper().points);
  const auto gp = net.guide(cond);
  const auto sched = diffusion::make_schedule(schedule, net.hyper().steps);
  const auto x = diffusion::p_sample_loop(net.denoiser(gp.s_tilde), net.hyper().points, sched, seed);
  return Generation{cond.frame.to_world(array_cloud(x)), cond.frame.to_world(array_cloud(gp.s_tilde)), gp.w};
}

Generator model_generator(const GuidingPointsNet& net, const EvalOptions& options) {
  return [&net, options](const data::Interaction& scene, std::size_t index) {
    return synthesize(net, scene, scene.prompt, mix_seed(options.seed, index), options.schedule);
  };
}

EvalReport evaluate(const Generator& generate, const std::vector<data::Interaction>& split, const EvalOptions& options) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  EvalReport out;
  double guiding_sum = 0.0;
  std::size_t guiding_count = 0;
  double ip_sum = 0.0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& scene = split[i];
    Generation gen = generate(scene, i);
    SampleRecord rec;
    rec.id = scene.id;
    const PointCloud& truth = scene.target.cloud;
    rec.report.cd = metrics::chamfer(gen.points, truth);
    // EMD needs equal sizes; the truth is resampled to the generated count.
    rec.report.emd = metrics::emd(gen.points, net::resample(truth, gen.points.size()), options.emd).distance;
    rec.report.f1 = metrics::f1(gen.points, truth);
    if (!gen.guiding.empty()) {
      rec.report.guiding_mse = metrics::guiding_mse(gen.guiding, truth.centroid());
      guiding_sum += *rec.report.guiding_mse;
      ++guiding_count;
    }
    std::vector<PointCloud> clouds;
    for (const auto& e : scene.entities) clouds.push_back(e.cloud);
    rec.report.ip3d = metrics::ip_3d(gen.points, clouds).fraction;
    ip_sum += *rec.report.ip3d;

    out.mean.cd += rec.report.cd;
    out.mean.emd += rec.report.emd;
    out.mean.f1 += rec.report.f1;
    rec.generated = std::move(gen.points);
    rec.guiding = std::move(gen.guiding);
    rec.w = std::move(gen.w);
    out.samples.push_back(std::move(rec));
  }
  const double n = static_cast<double>(split.size());
  out.mean.cd /= n;
  out.mean.emd /= n;
  out.mean.f1 /= n;
  out.mean.ip3d = ip_sum / n;
  if (guiding_count) out.mean.guiding_mse = guiding_sum / static_cast<double>(guiding_count);
  return out;
}

EvalReport evaluate(const GuidingPointsNet& net, const std::vector<data::Interaction>& split,
                    const EvalOptions& options) {
  return evaluate(model_generator(net, options), split, options);
}

std::vector<AblationRow> run_ablation_matrix(const std::vector<data::Interaction>& train_set,
                                             const std::vector<data::Interaction>& test_set, const TrainConfig& base,
                                             const MatrixOptions& options) {
  std::vector<AblationRow> rows;
  auto run = [&](const TrainConfig& cfg, std::string variant, std::uint64_t seed) {
    auto result = train(train_set, cfg);
    AblationRow row;
    row.variant = std::move(variant);
    row.seed = seed;
    row.report = evaluate(result.net, test_set, options.eval).mean;
    row.final_loss = result.log.epochs.empty() ? 0.0 : result.log.epochs.back().loss;
    rows.push_back(std::move(row));
  };
  for (std::uint64_t seed : options.seeds) {
    for (Ablation a : options.ablations) {
      TrainConfig cfg = base;
      cfg.ablation = a;
      cfg.seed = seed;
      run(cfg, net::to_string(a), seed);
    }
    for (std::size_t n : options.point_counts) {
      TrainConfig cfg = base;
      cfg.ablation = Ablation::Full;
      cfg.seed = seed;
      cfg.hp.points = n;
      run(cfg, "N=" + std::to_string(n), seed);
    }
  }
  return rows;
}

std::string matrix_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "variant,seed,cd,emd,f1,guiding_mse,ip3d,final_loss\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.seed << ',' << r.report.cd << ',' << r.report.emd << ',' << r.report.f1 << ',';
    if (r.report.guiding_mse) out << *r.report.guiding_mse;
    out << ',';
    if (r.report.ip3d) out << *r.report.ip3d;
    out << ',' << r.final_loss << '\n';
  }
  return out.str();
}

std::string matrix_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "| variant | seed | CD | EMD | F1 | guiding MSE |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.variant << " | " << r.seed << " | " << r.report.cd << " | " << r.report.emd << " | "
        << r.report.f1 << " | ";
    if (r.report.guiding_mse) out << *r.report.guiding_mse;
    out << " |\n";
  }
  return out.str();
}

}  // namespace scenediff::train
