#pragma once

#include <vector>

#include "core/types.hpp"

namespace bs {

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2
// on the [0,1] range. Evaluated over positions where the full window fits,
// averaged across channels. Images must be at least 11x11.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// d(mean SSIM)/d(a), same layout as a.data.
std::vector<double> ssim_backward(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace bs
