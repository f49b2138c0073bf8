#pragma once

#include "sgdlab/data.hpp"
#include "sgdlab/descent.hpp"
#include "sgdlab/experiments.hpp"
#include "sgdlab/io.hpp"
#include "sgdlab/objective.hpp"
#include "sgdlab/oracles.hpp"
#include "sgdlab/report.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/solvers.hpp"
#include "sgdlab/stats.hpp"
#include "sgdlab/types.hpp"
