#pragma once

#include "sit/gmm.hpp"
#include "sit/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sit {

/// Named ground-truth mixtures; every preset is labelled (class = component).
///   two-gauss-1d   w = (1/2, 1/2), mu = -2, +2, unit variance
///   grid-9         3x3 grid at {-4, 0, 4}^2, std 0.3, equal weights
///   ring-8         8 means on the circle of radius 4, std 0.2, equal weights
///   two-moons-gmm  12 means along two interleaved half-circles of radius 2
///                  (upper arc centred at the origin, lower arc centred at
///                  (2, 1)), std 0.2, equal weights
GaussianMixture preset(std::string_view name);
std::vector<std::string> preset_names();

struct LabeledSamples {
    Samples x;
    std::vector<int> labels;
};

/// Exact ancestral draws: component by its weight, then the Gaussian.
LabeledSamples draw(const GaussianMixture& gmm, std::size_t n, std::uint64_t seed);

} // namespace sit
