// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "treecrown/crowns.hpp"
#include "treecrown/error.hpp"
#include "treecrown/eval.hpp"
#include "treecrown/io.hpp"
#include "treecrown/morphology.hpp"
#include "treecrown/pipeline.hpp"
#include "treecrown/polygon.hpp"
#include "treecrown/raster.hpp"
#include "treecrown/synth.hpp"
#include "treecrown/terrain.hpp"
#include "treecrown/treetops.hpp"
