#pragma once

// Umbrella header.

#include "poinet/coattention.hpp"
#include "poinet/config.hpp"
#include "poinet/data.hpp"
#include "poinet/encoder.hpp"
#include "poinet/errors.hpp"
#include "poinet/heads.hpp"
#include "poinet/integration.hpp"
#include "poinet/model.hpp"
#include "poinet/numerics.hpp"
#include "poinet/pos.hpp"
#include "poinet/tape.hpp"
#include "poinet/training.hpp"
