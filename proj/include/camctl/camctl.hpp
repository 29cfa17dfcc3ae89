#pragma once

// Umbrella header.

#include "camctl/campath.hpp"
#include "camctl/error.hpp"
#include "camctl/geometry.hpp"
#include "camctl/image.hpp"
#include "camctl/io.hpp"
#include "camctl/lbfgs.hpp"
#include "camctl/metrics.hpp"
#include "camctl/parallel.hpp"
#include "camctl/preview.hpp"
#include "camctl/rigidfit.hpp"
#include "camctl/rng.hpp"
#include "camctl/segmentation.hpp"
#include "camctl/signal.hpp"
#include "camctl/synth.hpp"
#include "camctl/trajfield.hpp"

namespace camctl {
inline constexpr const char* kToolkitVersion = "0.1.0";
}
