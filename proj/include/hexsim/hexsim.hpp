#pragma once

#include "hexsim/env.hpp"
#include "hexsim/heightmap.hpp"
#include "hexsim/kv_config.hpp"
#include "hexsim/physics.hpp"
#include "hexsim/policy.hpp"
#include "hexsim/protocol.hpp"
#include "hexsim/reward.hpp"
#include "hexsim/rng.hpp"
#include "hexsim/robot.hpp"
#include "hexsim/sensing.hpp"
#include "hexsim/server.hpp"
#include "hexsim/task.hpp"
#include "hexsim/terrain.hpp"
