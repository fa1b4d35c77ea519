#pragma once

#include "homodyne/analysis.hpp"
#include "homodyne/characterize.hpp"
#include "homodyne/config.hpp"
#include "homodyne/constants.hpp"
#include "homodyne/detector.hpp"
#include "homodyne/dsp.hpp"
#include "homodyne/errors.hpp"
#include "homodyne/io.hpp"
#include "homodyne/rng.hpp"
#include "homodyne/spectrum.hpp"
#include "homodyne/synth.hpp"
#include "homodyne/trace.hpp"
