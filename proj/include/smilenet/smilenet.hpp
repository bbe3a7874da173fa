#pragma once

// Umbrella header for the whole library.

#include "smilenet/checkpoint.hpp"
#include "smilenet/config.hpp"
#include "smilenet/dataio.hpp"
#include "smilenet/errors.hpp"
#include "smilenet/image.hpp"
#include "smilenet/modelsel.hpp"
#include "smilenet/network.hpp"
#include "smilenet/nnops.hpp"
#include "smilenet/parallel.hpp"
#include "smilenet/rng.hpp"
#include "smilenet/tensor.hpp"
#include "smilenet/train.hpp"
#include "smilenet/util.hpp"
