#pragma once

// Umbrella header for the EKSS subspace-clustering toolkit.

#include "ekss/affinity.hpp"
#include "ekss/eval.hpp"
#include "ekss/experiment.hpp"
#include "ekss/geometry.hpp"
#include "ekss/hungarian.hpp"
#include "ekss/io.hpp"
#include "ekss/kss.hpp"
#include "ekss/random.hpp"
#include "ekss/spectral.hpp"
#include "ekss/synth.hpp"
#include "ekss/threading.hpp"
