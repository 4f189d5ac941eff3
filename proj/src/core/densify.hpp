#pragma once

#include <cstdint>

#include "core/types.hpp"

namespace bs {

struct DensifyConfig {
    int n_new = 8;              // samples drawn per sparse point
    int k = 4;                  // neighborhood size for the sampling box
    double dist_threshold = 2;  // reject candidates farther than this from the sparse set
    uint64_t seed = 42;
};

/// Augments a sparse cloud: for each sparse point, draws n_new candidates
/// uniformly inside the bounding box of the point and its k nearest sparse
/// neighbors, keeps candidates whose nearest sparse distance is within the
/// threshold, and copies attributes (with scale halved) from the candidate's
/// nearest sparse neighbor. The sparse prefix is returned unchanged, followed
/// by accepted candidates in generation order. Deterministic given the seed.
GaussianCloud densify_cloud(const GaussianCloud& sparse, const DensifyConfig& cfg);

}  // namespace bs
