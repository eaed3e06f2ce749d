#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scenediff/data/generator.hpp"
#include "scenediff/train/train.hpp"

namespace scenediff::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double limit_seconds = 0.0;

  /// "PASS <name>: <detail> (<s> s, limit <l> s)"
  std::string line() const;
};

/// Runs `body`, times it and fails the result when it exceeds the limit or
/// throws.
CheckResult timed(const std::string& name, double limit_seconds,
                  const std::function<bool(std::string& detail)>& body);

CheckResult check_discrete_identity();
CheckResult check_forward_convergence();
CheckResult check_containment_bound();
CheckResult check_chi_squared();
CheckResult check_containment_monotone();
CheckResult check_metric_oracles();
CheckResult check_gradients();
CheckResult check_interpenetration();

struct OverfitSettings {
  train::TrainConfig config;
  std::size_t updates = 500;
  std::size_t loss_draws = 64;
  std::uint64_t scene_seed = 0;
};

/// Desk preset with four transform attention layers of width 32 and a larger
/// step size.
OverfitSettings overfit_settings();
CheckResult check_overfit(const OverfitSettings& settings = overfit_settings());

struct DeskSettings {
  std::size_t train_count = 180;
  std::size_t test_count = 20;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int epochs = 200;
  double loss_drop = 0.8;
  std::size_t wins_needed = 4;
  double limit_seconds = 7200.0;
  /// Called with one line per finished run.
  std::function<void(const std::string&)> progress;
};

struct DeskRun {
  std::uint64_t seed = 0;
  train::Ablation ablation = train::Ablation::Full;
  double first_epoch_loss = 0.0;
  double last_epoch_loss = 0.0;
  metrics::MetricReport report;
  double seconds = 0.0;
};

struct DeskOutcome {
  std::vector<DeskRun> runs;
  /// Passes when the loss drop, the CD comparison with no_v and the guiding
  /// comparison with no_F all hold.
  CheckResult result;
  /// Full model trained with the first seed, for the editing checks.
  std::optional<train::GuidingPointsNet> model;
  data::Split split;
};

DeskOutcome check_desk_training(const DeskSettings& settings = {});

/// alter_shape base rows, displace relation rate over `runs` seeded edits,
/// and replacement self-alignment.
CheckResult check_editing(const train::GuidingPointsNet& model, const data::Split& split, std::size_t runs = 20);

/// Checks that need no trained model.
std::vector<CheckResult> theory_suite();

}  // namespace scenediff::verify
