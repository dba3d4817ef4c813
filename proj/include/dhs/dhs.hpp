// dhs.hpp: umbrella header (without the JSON-based io.hpp).

#pragma once

#include "dhs/linalg.hpp"
#include "dhs/system.hpp"
#include "dhs/propagate.hpp"
#include "dhs/weyl.hpp"
#include "dhs/green.hpp"
#include "dhs/testkit.hpp"
