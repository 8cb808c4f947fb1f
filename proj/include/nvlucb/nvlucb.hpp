#pragma once

#include "nvlucb/rng.hpp"
#include "nvlucb/linalg.hpp"
#include "nvlucb/neural.hpp"
#include "nvlucb/agents.hpp"
#include "nvlucb/envs.hpp"
#include "nvlucb/metrics.hpp"
#include "nvlucb/config.hpp"
#include "nvlucb/plots.hpp"
#include "nvlucb/harness.hpp"
