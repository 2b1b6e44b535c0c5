#pragma once

// Umbrella header.

#include "mls/common.hpp"
#include "mls/data.hpp"
#include "mls/margins.hpp"
#include "mls/scores.hpp"
#include "mls/synth.hpp"
#include "mls/gates.hpp"
#include "mls/eval.hpp"
#include "mls/io.hpp"
