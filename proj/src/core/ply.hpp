#pragma once

#include <string>
#include <vector>

#include "core/types.hpp"

namespace bs {

/// Binary little-endian PLY with float32 properties:
/// x y z rot_w rot_x rot_y rot_z scale_x scale_y scale_z (log-scale)
/// opacity (logit) f_dc_0..2 f_rest_*. f_rest is channel-major:
/// f_rest_[c * (n_basis - 1) + (k - 1)] holds basis k of channel c.
GaussianCloud load_ply(const std::string& path);

/// Comments are emitted verbatim as header `comment` lines.
void save_ply(const GaussianCloud& cloud, const std::string& path,
              const std::vector<std::string>& comments = {});

}  // namespace bs
