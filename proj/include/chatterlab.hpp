#pragma once

#include "chatterlab/approx_system.hpp"
#include "chatterlab/bounds.hpp"
#include "chatterlab/core_model.hpp"
#include "chatterlab/ctmc_sim.hpp"
#include "chatterlab/equilibrium.hpp"
#include "chatterlab/errors.hpp"
#include "chatterlab/fluid_engine.hpp"
#include "chatterlab/io.hpp"
#include "chatterlab/numerics.hpp"
#include "chatterlab/svg.hpp"
