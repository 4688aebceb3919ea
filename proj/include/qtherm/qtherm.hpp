#pragma once

// Umbrella header.

#include "qtherm/analytic.hpp"
#include "qtherm/engine.hpp"
#include "qtherm/error.hpp"
#include "qtherm/generators.hpp"
#include "qtherm/models.hpp"
#include "qtherm/qcore.hpp"
#include "qtherm/superop.hpp"
#include "qtherm/thermo.hpp"
