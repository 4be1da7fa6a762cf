#pragma once

#include "baseline.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "hypertune.hpp"
#include "metrics.hpp"
#include "nnet.hpp"
#include "rng.hpp"
#include "synth.hpp"
#include "textprep.hpp"
#include "trainer.hpp"
