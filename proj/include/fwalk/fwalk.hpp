#pragma once

#include "fwalk/error.hpp"
#include "fwalk/rng.hpp"
#include "fwalk/parallel.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/walk.hpp"
#include "fwalk/hitting.hpp"
#include "fwalk/barriers.hpp"
#include "fwalk/martin.hpp"
#include "fwalk/boundary.hpp"
#include "fwalk/observables.hpp"
#include "fwalk/schottky.hpp"
#include "fwalk/config.hpp"
#include "fwalk/validate.hpp"
