#pragma once

// Umbrella header for the whole library.

#include "hanet/attention.hpp"
#include "hanet/checkpoint.hpp"
#include "hanet/data.hpp"
#include "hanet/diagnostics.hpp"
#include "hanet/errors.hpp"
#include "hanet/gradcheck.hpp"
#include "hanet/layers.hpp"
#include "hanet/metrics_io.hpp"
#include "hanet/model.hpp"
#include "hanet/rng.hpp"
#include "hanet/tensor.hpp"
#include "hanet/train.hpp"
#include "hanet/version.hpp"
