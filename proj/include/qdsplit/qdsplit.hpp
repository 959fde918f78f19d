#pragma once

#include "qdsplit/numerics.hpp"
#include "qdsplit/waveguide_modes.hpp"
#include "qdsplit/coupler_design.hpp"
#include "qdsplit/photon_stream.hpp"
#include "qdsplit/correlation.hpp"
#include "qdsplit/config.hpp"
