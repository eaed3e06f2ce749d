#include "scenediff/grad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenediff::grad {

GradcheckReport gradcheck(const Graph& graph, NodeId loss, const Bindings& inputs,
                          const ParamStore& params, const GradcheckOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("gradcheck: step must be positive");
  GradcheckReport report;
  if (graph.param_nodes().empty()) return report;

  const GradientMap analytic = gradients(graph, loss, inputs, params);
  ParamStore probe = params;
  auto loss_at = [&]() { return forward(graph, inputs, probe)[loss].item(); };

  for (const auto& [name, grad] : analytic) {
    DenseArray& value = probe.get_mut(name);
    const std::size_t count = value.size();
    const std::size_t stride = std::max<std::size_t>(1, count / std::max<std::size_t>(1, options.max_elements));
    GradcheckEntry entry;
    for (std::size_t i = 0; i < count; i += stride) {
      const double original = value[i];
      value[i] = original + options.step;
      const double up = loss_at();
      value[i] = original - options.step;
      const double down = loss_at();
      value[i] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = grad[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      entry.max_relative_error = std::max(entry.max_relative_error, std::abs(a - numeric) / denom);
      ++entry.probed;
    }
    report.emplace(name, entry);
  }
  return report;
}

double max_error(const GradcheckReport& report) {
  double worst = 0.0;
  for (const auto& [_, e] : report) worst = std::max(worst, e.max_relative_error);
  return worst;
}

}  // namespace scenediff::grad
