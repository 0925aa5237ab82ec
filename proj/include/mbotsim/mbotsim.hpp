#pragma once

// Umbrella header for the simulation library. The WebSocket bridge
// (mbotsim/ws_server.hpp) is not included here because it pulls in Boost.Beast.

#include "mbotsim/bus.hpp"
#include "mbotsim/controllers.hpp"
#include "mbotsim/core.hpp"
#include "mbotsim/engine.hpp"
#include "mbotsim/errors.hpp"
#include "mbotsim/kinematics.hpp"
#include "mbotsim/live_session.hpp"
#include "mbotsim/scenario.hpp"
#include "mbotsim/sensors.hpp"
#include "mbotsim/trajectory_log.hpp"
#include "mbotsim/wire.hpp"
