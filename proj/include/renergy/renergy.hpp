#pragma once

#include "renergy/error.hpp"
#include "renergy/lattice_energy.hpp"
#include "renergy/modular.hpp"
#include "renergy/obstacle.hpp"
#include "renergy/parallel.hpp"
#include "renergy/report_io.hpp"
#include "renergy/torus.hpp"
#include "renergy/types.hpp"
#include "renergy/version.hpp"
