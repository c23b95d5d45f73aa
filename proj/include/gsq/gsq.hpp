#pragma once

#include "gsq/ctmc.hpp"
#include "gsq/error.hpp"
#include "gsq/model.hpp"
#include "gsq/optimize.hpp"
#include "gsq/prf_forward.hpp"
#include "gsq/simulate.hpp"
