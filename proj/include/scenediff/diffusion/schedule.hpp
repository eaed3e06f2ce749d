#pragma once

#include <string>
#include <vector>

#include "scenediff/grad/dense_array.hpp"

namespace scenediff::diffusion {

using grad::DenseArray;

enum class ScheduleKind { Linear, Cosine };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Per-step noise variances with derived products. Index t runs over [0, T).
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::Linear;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }
  /// Variance of q(x_{t-1} | x_t, x0); zero at t = 0.
  double posterior_variance(int t) const;
};

/// Linear ramps beta from 1e-4 to 0.02 when T >= 1000; shorter schedules
/// scale both endpoints by 1000/T (clipped to 0.999). Cosine uses the squared-cosine
/// alpha_bar with offset 0.008 and betas clipped to 0.999.
NoiseSchedule make_schedule(ScheduleKind kind, int steps);

/// sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * noise.
DenseArray q_sample(const DenseArray& x0, int t, const DenseArray& noise, const NoiseSchedule& schedule);

}  // namespace scenediff::diffusion
