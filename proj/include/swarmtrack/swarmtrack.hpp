#pragma once

#include "swarmtrack/types.hpp"
#include "swarmtrack/world.hpp"
#include "swarmtrack/sensing.hpp"
#include "swarmtrack/tracking.hpp"
#include "swarmtrack/consensus.hpp"
#include "swarmtrack/planning.hpp"
#include "swarmtrack/metrics.hpp"
#include "swarmtrack/scenario.hpp"
#include "swarmtrack/simulation.hpp"
#include "swarmtrack/experiment.hpp"
