#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "scenediff/grad/graph.hpp"
#include "scenediff/grad/param_store.hpp"

namespace scenediff::grad {

struct GradcheckOptions {
  double step = 1e-6;
  /// Elements probed per parameter; larger parameters are subsampled with a
  /// fixed stride so the check stays deterministic.
  std::size_t max_elements = 64;
  /// Denominator floor: relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-4;
};

struct GradcheckEntry {
  double max_relative_error = 0.0;
  std::size_t probed = 0;
};

using GradcheckReport = std::map<std::string, GradcheckEntry>;

/// Compares reverse-mode gradients against central differences of the loss,
/// element by element. A graph without parameters yields an empty report.
GradcheckReport gradcheck(const Graph& graph, NodeId loss, const Bindings& inputs,
                          const ParamStore& params, const GradcheckOptions& options = {});

double max_error(const GradcheckReport& report);

}  // namespace scenediff::grad
