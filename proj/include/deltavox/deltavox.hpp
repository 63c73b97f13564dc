// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0

#ifndef DELTAVOX_DELTAVOX_HPP
#define DELTAVOX_DELTAVOX_HPP

#include "deltavox/bench.hpp"
#include "deltavox/config.hpp"
#include "deltavox/delta.hpp"
#include "deltavox/errors.hpp"
#include "deltavox/geometry.hpp"
#include "deltavox/io.hpp"
#include "deltavox/losses.hpp"
#include "deltavox/metrics.hpp"
#include "deltavox/parallel.hpp"
#include "deltavox/pipeline.hpp"
#include "deltavox/report.hpp"
#include "deltavox/synth.hpp"
#include "deltavox/voxel.hpp"

#endif  // DELTAVOX_DELTAVOX_HPP
