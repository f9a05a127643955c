#pragma once

// Patch discriminator: four stride-2 3x3 convs (3->32->64->128->256) with
// GELU, a 3x3 conv to one logit channel, then the spatial mean. The logit map
// is H/16 x W/16.

#include "amisr/params.hpp"

namespace amisr {

ParamSpecs declare_discriminator();

template <typename T>
ParamStore<T> build_discriminator(Rng& rng);

// Logit map (N,1,H/16,W/16). H and W must be divisible by 16.
template <typename T>
Var<T> discriminator_map(Binder<T>& params, const Var<T>& x);

// Mean logit per sample, (N,1,1,1).
template <typename T>
Var<T> discriminator_logits(Binder<T>& params, const Var<T>& x);

}  // namespace amisr
