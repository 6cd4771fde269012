#pragma once

#include "cli.hpp"
#include "diagnostics.hpp"
#include "diagnostics_io.hpp"
#include "error.hpp"
#include "flow.hpp"
#include "generators.hpp"
#include "geometry.hpp"
#include "mesh.hpp"
#include "mesh_io.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "state.hpp"
