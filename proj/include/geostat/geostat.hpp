#pragma once

#include "geostat/compositional.hpp"
#include "geostat/covmodel.hpp"
#include "geostat/errors.hpp"
#include "geostat/estimate.hpp"
#include "geostat/field.hpp"
#include "geostat/gmrf.hpp"
#include "geostat/io.hpp"
#include "geostat/lowrank.hpp"
#include "geostat/optim.hpp"
#include "geostat/rng.hpp"
#include "geostat/sptemporal.hpp"
