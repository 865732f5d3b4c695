#pragma once

// Convenience umbrella header.

#include "vdyn/caseio.hpp"
#include "vdyn/common.hpp"
#include "vdyn/devices.hpp"
#include "vdyn/jacobian.hpp"
#include "vdyn/monotone.hpp"
#include "vdyn/network.hpp"
#include "vdyn/powerflow.hpp"
#include "vdyn/results.hpp"
#include "vdyn/simulator.hpp"
#include "vdyn/system.hpp"
