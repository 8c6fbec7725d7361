#pragma once

#include "ringmx/core.hpp"
#include "ringmx/errors.hpp"
#include "ringmx/explorer.hpp"
#include "ringmx/maekawa.hpp"
#include "ringmx/reproduce.hpp"
#include "ringmx/protocol.hpp"
#include "ringmx/quorum.hpp"
#include "ringmx/ring_mutex.hpp"
#include "ringmx/simnet.hpp"
#include "ringmx/wait_for.hpp"
