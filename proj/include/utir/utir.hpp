#pragma once

// Umbrella header for the UTIR toolkit: in-line holography simulation,
// two-path CNN twin-image filtering, hologram-consistent reconstruction,
// Gerchberg-Saxton baselines, and the evaluation harness.

#include "utir/bench.hpp"
#include "utir/cnn.hpp"
#include "utir/dataset.hpp"
#include "utir/errors.hpp"
#include "utir/fft.hpp"
#include "utir/gs.hpp"
#include "utir/image_io.hpp"
#include "utir/image_ops.hpp"
#include "utir/parallel.hpp"
#include "utir/plot.hpp"
#include "utir/propagate.hpp"
#include "utir/raster.hpp"
#include "utir/reconstruct.hpp"
#include "utir/rng.hpp"
#include "utir/tiling.hpp"
