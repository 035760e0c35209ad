#pragma once

#include "qbmaser/analysis.hpp"
#include "qbmaser/config.hpp"
#include "qbmaser/constants.hpp"
#include "qbmaser/io.hpp"
#include "qbmaser/model.hpp"
#include "qbmaser/oracle.hpp"
#include "qbmaser/parameters.hpp"
#include "qbmaser/schedule.hpp"
#include "qbmaser/simulate.hpp"
#include "qbmaser/solver.hpp"
#include "qbmaser/state.hpp"
#include "qbmaser/sweep.hpp"
