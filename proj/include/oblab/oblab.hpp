#pragma once

#include "oblab/error.hpp"
#include "oblab/grid.hpp"
#include "oblab/field.hpp"
#include "oblab/quadrature.hpp"
#include "oblab/polynomial.hpp"
#include "oblab/fixtures.hpp"
#include "oblab/measures.hpp"
#include "oblab/solver.hpp"
#include "oblab/functionals.hpp"
#include "oblab/blowup.hpp"
#include "oblab/recursion.hpp"
#include "oblab/field_io.hpp"
#include "oblab/experiment.hpp"
