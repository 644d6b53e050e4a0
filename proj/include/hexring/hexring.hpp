// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Umbrella header for the hexring toolkit.

#include "hexring/beamline.hpp"
#include "hexring/config.hpp"
#include "hexring/constants.hpp"
#include "hexring/errors.hpp"
#include "hexring/geom.hpp"
#include "hexring/image.hpp"
#include "hexring/imgproc.hpp"
#include "hexring/io.hpp"
#include "hexring/lattice.hpp"
#include "hexring/radial_map.hpp"
#include "hexring/rng.hpp"
#include "hexring/stopping.hpp"
#include "hexring/synth.hpp"
#include "hexring/transit.hpp"
