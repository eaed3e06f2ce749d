#include <doctest.h>

#include <stdexcept>
#include <thread>

#include "scenediff/verify/checks.hpp"

using namespace scenediff::verify;

TEST_CASE("timed records pass, failure, exceptions and the limit") {
  auto r = timed("ok", 10.0, [](std::string& d) {
    d = "fine";
    return true;
  });
  CHECK(r.passed);
  CHECK(r.detail == "fine");
  CHECK(r.line().rfind("PASS ok: fine (", 0) == 0);
  CHECK(r.line().find("limit 10 s") != std::string::npos);

  r = timed("no", 10.0, [](std::string&) { return false; });
  CHECK_FALSE(r.passed);
  CHECK(r.line().rfind("FAIL no:", 0) == 0);

  r = timed("throws", 10.0, [](std::string&) -> bool { throw std::runtime_error("boom"); });
  CHECK_FALSE(r.passed);
  CHECK(r.detail.find("boom") != std::string::npos);

  r = timed("slow", 0.001, [](std::string&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    return true;
  });
  CHECK_FALSE(r.passed);
  CHECK(r.seconds >= 0.02);
}

TEST_CASE("cheap checks pass") {
  CHECK(check_discrete_identity().passed);
  CHECK(check_forward_convergence().passed);
  CHECK(check_containment_monotone().passed);
  CHECK(check_metric_oracles().passed);
}
