#pragma once

#include "pinncw/common.hpp"
#include "pinncw/experiment.hpp"
#include "pinncw/jet.hpp"
#include "pinncw/jet2.hpp"
#include "pinncw/metrics.hpp"
#include "pinncw/mlp.hpp"
#include "pinncw/numeric.hpp"
#include "pinncw/optimizer.hpp"
#include "pinncw/problems.hpp"
#include "pinncw/quadrature.hpp"
#include "pinncw/resampling.hpp"
#include "pinncw/rng.hpp"
#include "pinncw/tape.hpp"
#include "pinncw/trainer.hpp"
#include "pinncw/weighting.hpp"
