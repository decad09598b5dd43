#pragma once

#include "szego/error.hpp"
#include "szego/mode_vector.hpp"
#include "szego/spectral.hpp"
#include "szego/dopri.hpp"
#include "szego/integrator.hpp"
#include "szego/hankel.hpp"
#include "szego/fit.hpp"
#include "szego/rank_one.hpp"
#include "szego/experiments.hpp"
