#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "scenediff/diffusion/schedule.hpp"

namespace scenediff::diffusion {

/// Predicts x0 from a noisy [N, 3] cloud at schedule index t. Conditioning
/// is bound into the callable.
using Denoiser = std::function<DenseArray(const DenseArray& x_t, int t)>;

/// Ancestral x0-prediction sampler starting from x_{T-1} ~ N(0, I). Returns
/// the prediction made at t = 0.
DenseArray p_sample_loop(const Denoiser& denoiser, std::size_t points, const NoiseSchedule& schedule,
                         std::uint64_t seed);

/// true marks a known row.
using InpaintMask = std::vector<bool>;

/// Same loop as p_sample_loop, but after every step the known rows are
/// replaced by a fresh forward sample of `known` at the new noise level. The
/// result carries `known` verbatim in those rows.
DenseArray inpaint_loop(const Denoiser& denoiser, const NoiseSchedule& schedule, const InpaintMask& mask,
                        const DenseArray& known, std::uint64_t seed);

/// Marks the `fraction` of rows with the lowest z (ties by index).
InpaintMask lowest_z_mask(const DenseArray& cloud, double fraction);

}  // namespace scenediff::diffusion
