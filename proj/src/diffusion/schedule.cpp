#include "scenediff/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace scenediff::diffusion {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw std::invalid_argument("unknown schedule kind: " + name);
}

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::Linear ? "linear" : "cosine"; }

NoiseSchedule make_schedule(ScheduleKind kind, int steps) {
  if (steps < 2) throw std::invalid_argument("make_schedule: need at least 2 steps, got " + std::to_string(steps));
  NoiseSchedule s;
  s.kind = kind;
  const auto n = static_cast<std::size_t>(steps);
  s.beta.resize(n);
  if (kind == ScheduleKind::Linear) {
    const double scale = std::max(1.0, 1000.0 / steps);
    const double lo = 1e-4 * scale;
    const double hi = 0.02 * scale;
    for (std::size_t t = 0; t < n; ++t) {
      s.beta[t] = std::min(lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(n - 1), 0.999);
    }
  } else {
    constexpr double offset = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
      return c * c;
    };
    for (std::size_t t = 0; t < n; ++t) {
      s.beta[t] = std::min(1.0 - f(static_cast<double>(t + 1)) / f(static_cast<double>(t)), 0.999);
    }
  }
  s.alpha.resize(n);
  s.alpha_bar.resize(n);
  double prod = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    prod *= s.alpha[t];
    s.alpha_bar[t] = prod;
  }
  return s;
}

double NoiseSchedule::posterior_variance(int t) const {
  if (t <= 0) return 0.0;
  const auto i = static_cast<std::size_t>(t);
  return beta[i] * (1.0 - alpha_bar[i - 1]) / (1.0 - alpha_bar[i]);
}

DenseArray q_sample(const DenseArray& x0, int t, const DenseArray& noise, const NoiseSchedule& schedule) {
  if (t < 0 || t >= schedule.steps()) {
    throw std::out_of_range("q_sample: t=" + std::to_string(t) + " outside [0, " + std::to_string(schedule.steps()) + ")");
  }
  if (noise.shape() != x0.shape()) throw grad::ShapeError("q_sample: noise shape differs from x0");
  const double a = std::sqrt(schedule.alpha_bar[static_cast<std::size_t>(t)]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[static_cast<std::size_t>(t)]);
  DenseArray out(x0.shape());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
  return out;
}

}  // namespace scenediff::diffusion
