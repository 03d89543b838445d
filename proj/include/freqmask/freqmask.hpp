#pragma once

#include "freqmask/autodiff.hpp"
#include "freqmask/backbone.hpp"
#include "freqmask/disentangle.hpp"
#include "freqmask/errors.hpp"
#include "freqmask/gradcheck.hpp"
#include "freqmask/io.hpp"
#include "freqmask/masks.hpp"
#include "freqmask/ops.hpp"
#include "freqmask/rng.hpp"
#include "freqmask/sampler.hpp"
#include "freqmask/scene.hpp"
#include "freqmask/spectral.hpp"
#include "freqmask/tensor.hpp"
#include "freqmask/train.hpp"
