#pragma once

#include "dalnot/program.hpp"
#include "dalnot/interp.hpp"
#include "dalnot/clp.hpp"
#include "dalnot/lia.hpp"
#include "dalnot/model.hpp"
#include "dalnot/solver.hpp"
#include "dalnot/compiler.hpp"
#include "dalnot/unfolder.hpp"
#include "dalnot/nonterm.hpp"
