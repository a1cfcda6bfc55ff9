#pragma once

#include "loopsoup/coagulation.hpp"
#include "loopsoup/experiments.hpp"
#include "loopsoup/exploration.hpp"
#include "loopsoup/graph_process.hpp"
#include "loopsoup/gw_analytics.hpp"
#include "loopsoup/loop_measure.hpp"
#include "loopsoup/numeric.hpp"
#include "loopsoup/rng.hpp"
#include "loopsoup/soup_io.hpp"
#include "loopsoup/stats.hpp"
