#pragma once
// Umbrella header.

#include "memfep/cli.hpp"
#include "memfep/config.hpp"
#include "memfep/core.hpp"
#include "memfep/free_energy.hpp"
#include "memfep/geometry.hpp"
#include "memfep/langevin.hpp"
#include "memfep/mesh.hpp"
#include "memfep/potentials.hpp"
#include "memfep/shape_gradient.hpp"
#include "memfep/solver.hpp"
