#include "scenediff/serve/cli.hpp"

#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "scenediff/data/dataset_io.hpp"
#include "scenediff/data/generator.hpp"
#include "scenediff/grad/checkpoint.hpp"
#include "scenediff/serve/config.hpp"
#include "scenediff/serve/http.hpp"
#include "scenediff/verify/checks.hpp"

namespace scenediff::serve {

namespace {

using nlohmann::json;

json report_json(const metrics::MetricReport& r) {
  json j{{"cd", r.cd}, {"emd", r.emd}, {"f1", r.f1}};
  if (r.guiding_mse) j["guiding_mse"] = *r.guiding_mse;
  if (r.ip3d) j["ip3d"] = *r.ip3d;
  return j;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text << "\n";
}

/// A single interaction as JSON, or the first line of a dataset file.
data::Interaction load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read scene " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str(), nullptr, false);
  if (!j.is_discarded() && j.is_object()) return data::interaction_from_json(j);
  const auto all = data::load_dataset(path);
  if (all.empty()) throw std::runtime_error(path + " holds no interactions");
  return all.front();
}

train::TrainConfig train_config(const std::string& path) {
  return path.empty() ? train::TrainConfig{} : to_train_config(load_config(path));
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> out;
  for (auto s : parse_seeds(list)) out.push_back(static_cast<std::size_t>(s));
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"scenediff: text-conditioned object synthesis and editing in human scenes"};
  app.require_subcommand(1);
  std::function<void()> action;

  // gen-data
  std::uint64_t gd_seed = 0;
  std::size_t gd_count = 200, gd_points = 256;
  std::string gd_out = "data.jsonl";
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("--seed", gd_seed, "first interaction seed");
  gen->add_option("--count", gd_count, "number of interactions");
  gen->add_option("--points", gd_points, "points per cloud");
  gen->add_option("--out", gd_out, "output dataset file");
  gen->callback([&] {
    action = [&] {
      data::GeneratorConfig g;
      g.points = gd_points;
      data::save_dataset(gd_out, data::gen_dataset(gd_seed, gd_count, g));
      out << "wrote " << gd_count << " interactions to " << gd_out << "\n";
    };
  });

  // train
  std::string tr_config, tr_data, tr_test, tr_out = "model";
  std::optional<std::uint64_t> tr_seed;
  auto* tr = app.add_subcommand("train", "train a model and save a checkpoint");
  tr->add_option("--config", tr_config, "flat key=value config");
  tr->add_option("--data", tr_data, "training dataset")->required();
  tr->add_option("--test-data", tr_test, "held-out dataset for per-epoch guiding_mse");
  tr->add_option("--seed", tr_seed, "overrides the config seed");
  tr->add_option("--out", tr_out, "checkpoint stem");
  tr->callback([&] {
    action = [&] {
      auto c = train_config(tr_config);
      if (tr_seed) c.seed = *tr_seed;
      const auto train_set = data::load_dataset(tr_data);
      const auto held_out = tr_test.empty() ? std::vector<data::Interaction>{} : data::load_dataset(tr_test);
      const auto result = train::train(train_set, c, held_out, [&](const train::EpochRecord& e, const auto&) {
        out << "epoch " << e.epoch << " loss " << e.loss;
        if (e.guiding_mse) out << " guiding_mse " << *e.guiding_mse;
        out << "\n";
        return true;
      });
      train::save_model(tr_out, result.net);
      train::write_log(tr_out + ".log.jsonl", result.log);
      out << "saved " << grad::manifest_path(tr_out).string() << "\n";
    };
  });

  // eval
  std::string ev_ckpt, ev_data, ev_report;
  std::uint64_t ev_seed = 1234;
  std::size_t ev_edits = 0;
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a dataset");
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint stem")->required();
  ev->add_option("--data", ev_data, "evaluation dataset")->required();
  ev->add_option("--report,--out", ev_report, "JSON report file (default stdout)");
  ev->add_option("--seed", ev_seed, "sampling seed");
  ev->add_option("--edits", ev_edits, "also run this many cases per edit operation");
  ev->callback([&] {
    action = [&] {
      const auto net = train::load_model(ev_ckpt);
      const auto split = data::load_dataset(ev_data);
      train::EvalOptions o;
      o.seed = ev_seed;
      const auto rep = train::evaluate(net, split, o);
      json j{{"checkpoint_hash", grad::checkpoint_hash(ev_ckpt)}, {"mean", report_json(rep.mean)}};
      json samples = json::array();
      for (const auto& s : rep.samples) samples.push_back(json{{"id", s.id}, {"report", report_json(s.report)}});
      j["samples"] = samples;
      if (ev_edits > 0) {
        json rows = json::array();
        for (const auto& r : edit::evaluate_editing(split, net, ev_edits, ev_seed)) {
          rows.push_back(json{{"op", edit::to_string(r.op)},
                              {"cases", r.cases},
                              {"mean", report_json(r.mean)},
                              {"relation_rate", r.relation_rate}});
        }
        j["editing"] = rows;
      }
      write_text(ev_report, j.dump(2), out);
    };
  });

  // synth
  std::string sy_ckpt, sy_scene, sy_prompt, sy_out, sy_config;
  std::uint64_t sy_seed = 0;
  auto* sy = app.add_subcommand("synth", "generate an object for a scene");
  sy->add_option("--checkpoint", sy_ckpt, "checkpoint stem")->required();
  sy->add_option("--scene", sy_scene, "scene JSON or dataset file")->required();
  sy->add_option("--prompt", sy_prompt, "text prompt (default: the scene's own)");
  sy->add_option("--seed", sy_seed, "sampling seed");
  sy->add_option("--config", sy_config, "config; only `schedule` is used");
  sy->add_option("--out", sy_out, "output JSON (default stdout)");
  sy->callback([&] {
    action = [&] {
      const auto net = train::load_model(sy_ckpt);
      const auto scene = load_scene(sy_scene);
      const std::string prompt = sy_prompt.empty() ? scene.prompt : sy_prompt;
      const auto g = train::synthesize(net, scene, prompt, sy_seed, train_config(sy_config).schedule);
      const json j{{"points", flatten(g.points)},
                   {"guiding_points", flatten(g.guiding)},
                   {"attention_weights", g.w},
                   {"seed", sy_seed},
                   {"prompt", prompt}};
      write_text(sy_out, j.dump(), out);
    };
  });

  // edit
  std::string ed_ckpt, ed_scene, ed_op, ed_prompt, ed_out, ed_config;
  std::size_t ed_target = 0;
  std::uint64_t ed_seed = 0;
  auto* ed = app.add_subcommand("edit", "replace, reshape or move an object");
  ed->add_option("--checkpoint", ed_ckpt, "checkpoint stem")->required();
  ed->add_option("--scene", ed_scene, "scene JSON or dataset file")->required();
  ed->add_option("--op", ed_op, "replace, alter_shape or displace")->required();
  ed->add_option("--prompt", ed_prompt, "edit prompt")->required();
  ed->add_option("--target-id", ed_target, "entity index of the object")->required();
  ed->add_option("--seed", ed_seed, "sampling seed");
  ed->add_option("--config", ed_config, "config; only `schedule` is used");
  ed->add_option("--out", ed_out, "output JSON (default stdout)");
  ed->callback([&] {
    action = [&] {
      const auto net = train::load_model(ed_ckpt);
      const auto scene = load_scene(ed_scene);
      const edit::EditRequest req{scene.id, edit::parse_edit_op(ed_op), ed_prompt, ed_target};
      const auto r = edit::edit(scene, req, net, ed_seed, train_config(ed_config).schedule);
      json j{{"points", flatten(r.points)},     {"guiding_points", flatten(r.guiding)},
             {"attention_weights", r.w},        {"seed", ed_seed},
             {"entity_id", ed_target},          {"warnings", r.warnings}};
      if (req.op == edit::EditOp::AlterShape) j["fixed"] = r.fixed;
      write_text(ed_out, j.dump(), out);
    };
  });

  // verify
  bool vf_no_grad = false;
  auto* vf = app.add_subcommand("verify", "run the theory checks and gradient checks");
  vf->add_flag("--skip-gradients", vf_no_grad, "only the theory suite");
  int verify_status = 0;
  vf->callback([&] {
    action = [&] {
      auto results = verify::theory_suite();
      if (!vf_no_grad) results.push_back(verify::check_gradients());
      for (const auto& r : results) {
        out << r.line() << "\n";
        if (!r.passed) verify_status = 2;
      }
    };
  });

  // ablate
  std::string ab_config, ab_data, ab_test, ab_out, ab_seeds = "0", ab_points = "64,128,256";
  auto* ab = app.add_subcommand("ablate", "train and score every ablation and point count");
  ab->add_option("--config", ab_config, "base config");
  ab->add_option("--data", ab_data, "training dataset")->required();
  ab->add_option("--test-data", ab_test, "evaluation dataset")->required();
  ab->add_option("--seed,--seeds", ab_seeds, "comma separated training seeds");
  ab->add_option("--points", ab_points, "comma separated point counts");
  ab->add_option("--out", ab_out, "CSV output (markdown goes to stdout)");
  ab->callback([&] {
    action = [&] {
      const auto base = train_config(ab_config);
      train::MatrixOptions o;
      o.seeds = parse_seeds(ab_seeds);
      o.point_counts = parse_sizes(ab_points);
      o.eval.schedule = base.schedule;
      const auto rows =
          train::run_ablation_matrix(data::load_dataset(ab_data), data::load_dataset(ab_test), base, o);
      if (!ab_out.empty()) write_text(ab_out, train::matrix_csv(rows), out);
      out << train::matrix_markdown(rows);
    };
  });

  // serve
  std::string sv_ckpt, sv_host = "127.0.0.1", sv_config;
  int sv_port = 8080;
  auto* sv = app.add_subcommand("serve", "run the HTTP service");
  sv->add_option("--checkpoint", sv_ckpt, "checkpoint stem")->required();
  sv->add_option("--host", sv_host, "bind address");
  sv->add_option("--port", sv_port, "bind port");
  sv->add_option("--config", sv_config, "config; only `schedule` is used");
  sv->callback([&] {
    action = [&] {
      ServiceOptions o;
      o.schedule = train_config(sv_config).schedule;
      o.checkpoint_hash = grad::checkpoint_hash(sv_ckpt);
      Service service(train::load_model(sv_ckpt), o);
      out << "serving " << sv_ckpt << " on http://" << sv_host << ":" << sv_port << std::endl;
      if (!run_server(service, sv_host, sv_port)) {
        throw std::runtime_error("cannot bind " + sv_host + ":" + std::to_string(sv_port));
      }
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    action();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return verify_status;
}

}  // namespace scenediff::serve
