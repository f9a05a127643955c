#pragma once

#include <cstdint>

#include "amisr/image.hpp"

namespace amisr {

// Procedural face: gradient background, hair cap, skin ellipse, eyes with
// irises and highlights, brows, nose shading and a mouth arc. Every shape
// parameter and the color jitter come from Rng(seed). Edges are 4x4
// supersampled. Throws ConfigError when size < 32.
ImageBuffer synth_face(uint64_t seed, int64_t size = 128);

}  // namespace amisr
