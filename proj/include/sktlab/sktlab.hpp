#pragma once

#include "sktlab/errors.hpp"
#include "sktlab/polynomial.hpp"
#include "sktlab/model.hpp"
#include "sktlab/sampling.hpp"
#include "sktlab/structure.hpp"
#include "sktlab/grid.hpp"
#include "sktlab/field_io.hpp"
#include "sktlab/diagnostics.hpp"
#include "sktlab/solver.hpp"
#include "sktlab/attractor.hpp"
#include "sktlab/io.hpp"
#include "sktlab/manifest.hpp"
