#pragma once

// Everything, including persistence (needs the vendored json header).

#include "polyrad/error.hpp"
#include "polyrad/problem.hpp"
#include "polyrad/radial_system.hpp"
#include "polyrad/integrator.hpp"
#include "polyrad/quadrature.hpp"
#include "polyrad/shooting.hpp"
#include "polyrad/asymptotics.hpp"
#include "polyrad/negpower.hpp"
#include "polyrad/verify.hpp"
#include "polyrad/io.hpp"
#include "polyrad/config.hpp"
