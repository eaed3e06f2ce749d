// Runs every acceptance check and prints one PASS/FAIL line per criterion.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "scenediff/verify/checks.hpp"

using namespace scenediff;

int main(int argc, char** argv) {
  CLI::App app{"scenediff acceptance checks"};
  bool quiet = false;
  std::string report;
  app.add_flag("--quiet", quiet, "no progress lines on stderr");
  app.add_option("--report", report, "also write the result lines to this file");
  CLI11_PARSE(app, argc, argv);

  std::ofstream file;
  if (!report.empty()) {
    file.open(report);
    if (!file) {
      std::cerr << "cannot write " << report << "\n";
      return 2;
    }
  }
  auto emit = [&](const verify::CheckResult& r) {
    std::cout << r.line() << std::endl;
    if (file.is_open()) file << r.line() << std::endl;
    return r.passed;
  };
  bool ok = true;
  ok &= emit(verify::check_discrete_identity());
  ok &= emit(verify::check_forward_convergence());
  ok &= emit(verify::check_containment_bound());
  ok &= emit(verify::check_chi_squared());
  ok &= emit(verify::check_containment_monotone());
  ok &= emit(verify::check_metric_oracles());
  ok &= emit(verify::check_gradients());
  ok &= emit(verify::check_overfit());

  verify::DeskSettings desk;
  if (!quiet) desk.progress = [](const std::string& s) { std::cerr << "  " << s << std::endl; };
  const auto outcome = verify::check_desk_training(desk);
  ok &= emit(outcome.result);
  if (outcome.model) {
    ok &= emit(verify::check_editing(*outcome.model, outcome.split));
  } else {
    verify::CheckResult r;
    r.name = "editing contracts";
    r.detail = "no trained model";
    ok &= emit(r);
  }
  ok &= emit(verify::check_interpenetration());
  return ok ? 0 : 1;
}
