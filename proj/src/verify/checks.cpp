#include "scenediff/verify/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "scenediff/diffusion/schedule.hpp"
#include "scenediff/edit/edit.hpp"
#include "scenediff/geometry/hull.hpp"
#include "scenediff/grad/gradcheck.hpp"
#include "scenediff/metrics/metrics.hpp"
#include "scenediff/theory/concentration.hpp"
#include "scenediff/theory/prop1.hpp"

namespace scenediff::verify {

namespace {

using geometry::PointCloud;
using geometry::Vec3;
using grad::DenseArray;

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(Vec3(u(rng), u(rng), u(rng)));
  return c;
}

DenseArray random_array(grad::Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  DenseArray a(std::move(shape));
  for (double& v : a.values()) v = d(rng);
  return a;
}

// O(n^2) F-score reference.
double f1_reference(const PointCloud& a, const PointCloud& b, double tau) {
  auto near = [tau](const PointCloud& from, const PointCloud& to) {
    std::size_t hits = 0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
      if (best <= tau * tau) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(from.size());
  };
  const double precision = near(a, b);
  const double recall = near(b, a);
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

grad::NodeId probe(grad::Graph& g, grad::NodeId x, std::uint64_t seed) {
  return g.sum(g.mul(x, g.constant(random_array(g.shape(x), seed))));
}

}  // namespace

std::string CheckResult::line() const {
  std::ostringstream os;
  os << (passed ? "PASS " : "FAIL ") << name << ": " << detail << " (" << fmt(seconds, 3) << " s, limit "
     << fmt(limit_seconds) << " s)";
  return os.str();
}

CheckResult timed(const std::string& name, double limit_seconds,
                  const std::function<bool(std::string& detail)>& body) {
  CheckResult r;
  r.name = name;
  r.limit_seconds = limit_seconds;
  const auto start = std::chrono::steady_clock::now();
  try {
    r.passed = body(r.detail);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail += (r.detail.empty() ? "" : "; ") + std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (r.seconds > limit_seconds) {
    r.passed = false;
    r.detail += "; over time limit";
  }
  return r;
}

CheckResult check_discrete_identity() {
  return timed("discrete backward identity", 5.0, [](std::string& detail) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto r = theory::prop1_discrete_check(theory::random_chain(5, 3, 3, seed));
      worst = std::max(worst, r.max_deviation);
      checked += r.checked;
    }
    detail = "20 five-state chains, " + std::to_string(checked) + " tuples, max deviation " + fmt(worst) +
             " (tol 1e-10)";
    return worst < 1e-10;
  });
}

CheckResult check_forward_convergence() {
  return timed("forward process convergence", 2.0, [](std::string& detail) {
    const std::size_t n = 10000;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    DenseArray x0({n, 3});
    for (double& v : x0.values()) v = u(rng);
    const auto sched = diffusion::make_schedule(diffusion::ScheduleKind::Cosine, 100);
    const auto xt = diffusion::q_sample(x0, 99, random_array({n, 3}, 2), sched);
    bool ok = true;
    std::ostringstream os;
    os << "cosine T=100, t=99, 10k points:";
    for (std::size_t k = 0; k < 3; ++k) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += xt.at(i, k);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) sq += (xt.at(i, k) - mean) * (xt.at(i, k) - mean);
      const double var = sq / static_cast<double>(n - 1);
      ok = ok && std::abs(mean) < 0.05 && std::abs(var - 1.0) < 0.1;
      os << " axis " << k << " mean " << fmt(mean, 3) << " var " << fmt(var, 4) << ";";
    }
    os << " tol |mean| < 0.05, |var - 1| < 0.1";
    detail = os.str();
    return ok;
  });
}

CheckResult check_containment_bound() {
  return timed("containment bound", 30.0, [](std::string& detail) {
    PointCloud cube;
    for (int i = 0; i < 8; ++i) cube.push_back(Vec3(i & 1 ? 0.5 : -0.5, i & 2 ? 0.5 : -0.5, i & 4 ? 0.5 : -0.5));
    bool ok = true;
    std::ostringstream os;
    os << "unit cube, L=1000, 10k trials:";
    std::uint64_t seed = 100;
    for (double ratio : {0.05, 0.1, 0.25}) {
      auto cfg = theory::concentration_config(cube, 0.0, 1000, 10000);
      cfg.sigma0 = ratio * cfg.d0;
      const auto r = theory::prop2_mc(cfg, ++seed);
      const bool cell = r.containment_rate >= r.bound_chi3_sigma - 3.0 * r.standard_error;
      ok = ok && cell;
      os << " sigma0=" << ratio << "*d0 rate " << fmt(r.containment_rate, 8) << " chi3 "
         << fmt(r.bound_chi3_sigma, 8) << " erf-form " << fmt(r.bound_erf_sigma, 8) << ";";
    }
    detail = os.str();
    return ok;
  });
}

CheckResult check_chi_squared() {
  return timed("chi-squared law", 10.0, [](std::string& detail) {
    const auto ks = theory::chi2_check(64, 0.3, 1, 10000, 11);
    const auto tail = theory::chi2_check(21, 1.0, 1, 1000, 12, 1.0);
    const bool claim = tail.tail_l > 1.0 - 1e-9;
    detail = "KS p=" + fmt(ks.ks_pvalue) + " (dims=1, L=64, dof " + std::to_string(ks.dof) +
             ", need > 0.01); Pr(chi2_21 > 1) = 1 - " + fmt(1.0 - tail.tail_l, 4) +
             (claim ? " > 1 - 1e-9 as stated" : " does not exceed 1 - 1e-9");
    return ks.ks_pvalue > 0.01 && claim;
  });
}

CheckResult check_containment_monotone() {
  return timed("containment monotone in d0/sigma0", 1.0, [](std::string& detail) {
    bool monotone = true;
    bool high = true;
    double prev = -1.0;
    double at5 = 1.0;
    for (int i = 0; i < 50; ++i) {
      const double ratio = 0.2 * (i + 1);  // 0.2 .. 10
      const double p = theory::containment_prob(ratio, 1.0, theory::ContainmentMode::ExactChi3);
      monotone = monotone && p >= prev;
      prev = p;
      if (ratio > 5.0) {
        high = high && p > 0.999;
        at5 = std::min(at5, p);
      }
    }
    detail = std::string("50-point grid 0.2..10: ") + (monotone ? "monotone" : "NOT monotone") +
             "; min value above 5 = " + fmt(at5, 8) + " (need > 0.999)";
    return monotone && high;
  });
}

CheckResult check_metric_oracles() {
  return timed("metric oracles", 5.0, [](std::string& detail) {
    std::size_t emd_exact = 0;
    double emd_worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const PointCloud a = random_cloud(6, 1000 + seed);
      const PointCloud b = random_cloud(6, 2000 + seed);
      std::vector<double> cost(36);
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) cost[i * 6 + j] = (a[i] - b[j]).norm();
      }
      std::vector<std::size_t> perm(6);
      std::iota(perm.begin(), perm.end(), 0);
      double best = std::numeric_limits<double>::infinity();
      do {
        double s = 0.0;
        for (std::size_t i = 0; i < 6; ++i) s += cost[i * 6 + perm[i]];
        best = std::min(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      const auto assignment = metrics::hungarian(cost, 6);
      double found = 0.0;
      for (std::size_t i = 0; i < 6; ++i) found += cost[i * 6 + assignment[i]];
      if (found == best) ++emd_exact;
      emd_worst = std::max(emd_worst, std::abs(metrics::emd(a, b, metrics::EmdMode::Exact).distance - best / 6.0));
    }
    double cd_worst = 0.0, f1_worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const PointCloud a = random_cloud(200, 3000 + seed);
      const PointCloud b = random_cloud(200, 4000 + seed);
      cd_worst = std::max(cd_worst, std::abs(metrics::chamfer(a, b) - metrics::chamfer_brute(a, b)));
      f1_worst = std::max(f1_worst, std::abs(metrics::f1(a, b, 0.2) - f1_reference(a, b, 0.2)));
    }
    detail = "hungarian == permutation minimum in " + std::to_string(emd_exact) + "/50 (emd diff " + fmt(emd_worst) +
             "); CD diff " + fmt(cd_worst) + ", F1 diff " + fmt(f1_worst) + " over 20 pairs (tol 1e-12)";
    return emd_exact == 50 && emd_worst < 1e-12 && cd_worst < 1e-12 && f1_worst < 1e-12;
  });
}

CheckResult check_gradients() {
  return timed("gradcheck", 60.0, [](std::string& detail) {
    net::HyperParams hp = net::HyperParams::desk();
    hp.points = 64;
    const net::Vocabulary vocab;
    grad::ParamStore params(7);
    net::init_params(params, hp, vocab.size());
    grad::Bindings inputs;
    inputs["entities"] = random_array({3, 64, 3}, 1, 0.5);
    inputs["tokens"] = vocab.bag("Place a round table to the left of the sofa.");
    inputs["x_t"] = random_array({64, 3}, 2);
    inputs["time"] = net::time_features(17, hp.d_time);
    inputs["x0"] = random_array({64, 3}, 3, 0.5);
    grad::GradcheckOptions opts;
    opts.step = 1e-4;
    opts.max_elements = 32;

    std::ostringstream os;
    double worst = 0.0;
    auto record = [&](const std::string& what, double err) {
      worst = std::max(worst, err);
      os << what << " " << fmt(err, 3) << "; ";
    };
    {
      grad::Graph g;
      const auto ent = g.input("entities", {3, 64, 3});
      const auto tok = g.input("tokens", {1, vocab.size()});
      const auto enc = net::encode_conditions(g, params, hp, ent, tok, net::Ablation::Full);
      const auto loss = g.add(g.add(probe(g, enc.q, 11), probe(g, enc.text, 12)), probe(g, enc.pooled, 13));
      record("encoders", grad::max_error(grad::gradcheck(g, loss, inputs, params, opts)));
    }
    {
      grad::Graph g;
      const auto text = g.input("text", {1, hp.d_text});
      const auto pooled = g.input("pooled", {3, hp.d_encoder});
      const auto tr = net::attend_translations(g, params, hp, text, pooled, net::Ablation::Full);
      const auto loss = g.add(probe(g, tr.w, 14), probe(g, tr.v, 15));
      const grad::Bindings in{{"text", random_array({1, hp.d_text}, 4)}, {"pooled", random_array({3, hp.d_encoder}, 5)}};
      record("translations", grad::max_error(grad::gradcheck(g, loss, in, params, opts)));
    }
    {
      grad::Graph g;
      const auto v = g.input("v", {3, 3});
      const auto q = g.input("q", {3, 64, 3});
      const auto f = net::attend_transforms(g, params, hp, v, q, net::Ablation::Full);
      const grad::Bindings in{{"v", random_array({3, 3}, 6)}, {"q", random_array({3, 64, 3}, 7)}};
      record("transforms", grad::max_error(grad::gradcheck(g, probe(g, f, 16), in, params, opts)));
    }
    {
      grad::Graph g;
      const auto x = g.input("x_t", {64, 3});
      const auto t = g.input("time", {1, hp.d_time});
      const auto s = g.input("s", {64, 3});
      const auto out = net::denoise_step(g, params, hp, x, t, s);
      const grad::Bindings in{{"x_t", inputs["x_t"]}, {"time", inputs["time"]}, {"s", random_array({64, 3}, 8)}};
      record("denoiser", grad::max_error(grad::gradcheck(g, probe(g, out, 17), in, params, opts)));
    }
    for (net::Ablation a : net::kAblations) {
      grad::Graph g;
      const auto nodes = net::build_network(g, params, hp, 3, a, true);
      record("loss/" + net::to_string(a), grad::max_error(grad::gradcheck(g, nodes.loss, inputs, params, opts)));
    }
    detail = "N=64, M=2: " + os.str() + "max " + fmt(worst, 3) + " (tol 1e-4)";
    return worst < 1e-4;
  });
}

CheckResult check_interpenetration() {
  return timed("3D-IP sanity", 60.0, [](std::string& detail) {
    PointCloud box;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 200; ++i) box.push_back(Vec3(u(rng), u(rng), u(rng)));
    PointCloud away;
    for (const auto& p : box) away.push_back(p + Vec3(3.0, 0.0, 0.0));
    const double disjoint = metrics::ip_3d(away, {box}).fraction;

    const auto scenes = data::gen_dataset(5000, 200);
    double worst = 0.0;
    for (const auto& s : scenes) {
      std::vector<PointCloud> clouds;
      for (const auto& e : s.entities) clouds.push_back(e.cloud);
      worst = std::max(worst, metrics::ip_3d(s.target.cloud, clouds).fraction);
    }
    detail = "disjoint prediction " + fmt(disjoint) + "; max over 200 generated targets " + fmt(worst);
    return disjoint == 0.0 && worst == 0.0;
  });
}

OverfitSettings overfit_settings() {
  OverfitSettings s;
  s.config.hp.attention_layers = 4;
  s.config.hp.d_f = 32;
  s.config.hp.learning_rate = 1e-2;
  return s;
}

CheckResult check_overfit(const OverfitSettings& settings) {
  return timed("overfit one interaction", 300.0, [&](std::string& detail) {
    const auto scene = data::gen_interaction(settings.scene_seed);
    const auto& cfg = settings.config;
    const train::GuidingPointsNet initial(cfg.hp, cfg.ablation, cfg.seed);
    const auto sched = diffusion::make_schedule(cfg.schedule, cfg.hp.steps);
    const auto sample = train::make_sample(scene, initial.vocabulary(), cfg.hp.points);
    const double before = train::expected_loss(initial, sample, sched, settings.loss_draws, 7);
    const auto r = train::overfit(scene, cfg, settings.updates);
    const double after = train::expected_loss(r.net, sample, sched, settings.loss_draws, 7);
    const auto gen = train::synthesize(r.net, scene, scene.prompt, 3, cfg.schedule);
    const double cd = metrics::chamfer(gen.points, scene.target.cloud);
    detail = std::to_string(settings.updates) + " updates: expected loss " + fmt(before) + " -> " + fmt(after) + " (" +
             fmt(100.0 * after / before, 3) + "% of initial, need < 1%); sampled CD " + fmt(cd) + " (need < 0.05)";
    return after < 0.01 * before && cd < 0.05;
  });
}

DeskOutcome check_desk_training(const DeskSettings& settings) {
  DeskOutcome out;
  out.result = timed("desk-scale training", settings.limit_seconds, [&](std::string& detail) {
    out.split = data::gen_split(settings.train_count, settings.test_count);
    const train::Ablation variants[] = {train::Ablation::Full, train::Ablation::NoV, train::Ablation::NoF};
    bool drops = true;
    std::size_t cd_wins = 0, guide_wins = 0;
    std::ostringstream os;
    for (std::uint64_t seed : settings.seeds) {
      std::map<train::Ablation, DeskRun> by;
      for (train::Ablation a : variants) {
        const auto start = std::chrono::steady_clock::now();
        train::TrainConfig cfg;
        cfg.epochs = settings.epochs;
        cfg.ablation = a;
        cfg.seed = seed;
        auto result = train::train(out.split.train, cfg);
        DeskRun run;
        run.seed = seed;
        run.ablation = a;
        run.first_epoch_loss = result.log.epochs.front().loss;
        run.last_epoch_loss = result.log.epochs.back().loss;
        run.report = train::evaluate(result.net, out.split.test).mean;
        run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (a == train::Ablation::Full && !out.model) out.model.emplace(std::move(result.net));
        out.runs.push_back(run);
        by[a] = run;
        if (settings.progress) {
          settings.progress("seed " + std::to_string(seed) + " " + net::to_string(a) + ": loss " +
                            fmt(run.first_epoch_loss) + " -> " + fmt(run.last_epoch_loss) + ", CD " +
                            fmt(run.report.cd) + ", guiding_mse " + fmt(*run.report.guiding_mse) + ", " +
                            fmt(run.seconds, 3) + " s");
        }
      }
      const auto& full = by[train::Ablation::Full];
      const double drop = 1.0 - full.last_epoch_loss / full.first_epoch_loss;
      drops = drops && drop >= settings.loss_drop;
      const bool cd_win = full.report.cd < by[train::Ablation::NoV].report.cd;
      const bool guide_win = *full.report.guiding_mse < *by[train::Ablation::NoF].report.guiding_mse;
      cd_wins += cd_win;
      guide_wins += guide_win;
      os << "[seed " << seed << ": drop " << fmt(100.0 * drop, 3) << "%, CD " << fmt(full.report.cd) << " vs no_v "
         << fmt(by[train::Ablation::NoV].report.cd) << ", guiding " << fmt(*full.report.guiding_mse) << " vs no_F "
         << fmt(*by[train::Ablation::NoF].report.guiding_mse) << "] ";
    }
    os << "(a) loss drop >= " << fmt(100.0 * settings.loss_drop, 3) << "% in every full run: " << (drops ? "yes" : "no")
       << "; (b) CD wins " << cd_wins << "/" << settings.seeds.size() << "; (c) guiding wins " << guide_wins << "/"
       << settings.seeds.size() << " (need " << settings.wins_needed << ")";
    detail = os.str();
    return drops && cd_wins >= settings.wins_needed && guide_wins >= settings.wins_needed;
  });
  return out;
}

CheckResult check_editing(const train::GuidingPointsNet& model, const data::Split& split, std::size_t runs) {
  return timed("editing contracts", 600.0, [&](std::string& detail) {
    const auto alter = edit::build_edit_cases(split.test, edit::EditOp::AlterShape, 10, 0);
    std::size_t exact = 0, kept_total = 0;
    for (std::size_t i = 0; i < alter.size(); ++i) {
      const auto& c = alter[i];
      const auto res = edit::edit(c.scene, {c.scene.id, c.op, c.prompt, c.target_id}, model, i);
      const auto original = net::resample(c.scene.entities[c.target_id].cloud, model.hyper().points);
      bool same = true;
      std::size_t kept = 0;
      for (std::size_t j = 0; j < res.fixed.size(); ++j) {
        if (!res.fixed[j]) continue;
        ++kept;
        same = same && res.points[j].x() == original[j].x() && res.points[j].y() == original[j].y() &&
               res.points[j].z() == original[j].z();
      }
      exact += same && kept == original.size() / 4;
      kept_total += kept;
    }

    const auto displace = edit::build_edit_cases(split.test, edit::EditOp::Displace, runs, 0);
    std::size_t held = 0;
    if (displace.empty()) throw std::runtime_error("no displace cases in the test split");
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& c = displace[r % displace.size()];
      const auto res = edit::edit(c.scene, {c.scene.id, c.op, c.prompt, c.target_id}, model, r);
      held += edit::satisfies(edit::without_entity(c.scene, c.target_id), c.relation, c.anchors, res.points);
    }
    const double rate = static_cast<double>(held) / static_cast<double>(runs);

    double worst_fitness = 1.0, worst_mse = 0.0;
    for (const auto& s : split.test) {
      const auto gt = edit::build_replacement_gt(s.target.cloud, s.target.cloud);
      worst_fitness = std::min(worst_fitness, gt.report.fitness);
      worst_mse = std::max(worst_mse, gt.report.inlier_mse);
    }
    detail = "alter_shape base rows bit-exact in " + std::to_string(exact) + "/" + std::to_string(alter.size()) +
             " edits (" + std::to_string(kept_total) + " rows); displace relation held in " + std::to_string(held) +
             "/" + std::to_string(runs) + " = " + fmt(100.0 * rate, 3) + "% over " + std::to_string(displace.size()) +
             " cases (need >= 80%); self-alignment fitness min " + fmt(worst_fitness) + ", inlier_mse max " +
             fmt(worst_mse) + " (need 1.0, < 1e-10)";
    return !alter.empty() && exact == alter.size() && rate >= 0.8 && worst_fitness == 1.0 && worst_mse < 1e-10;
  });
}

std::vector<CheckResult> theory_suite() {
  return {check_discrete_identity(), check_forward_convergence(), check_containment_bound(),
          check_chi_squared(),       check_containment_monotone(), check_metric_oracles(),
          check_interpenetration()};
}

}  // namespace scenediff::verify
