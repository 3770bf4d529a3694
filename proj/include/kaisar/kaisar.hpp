#pragma once

// Umbrella header: pulls in the whole checker pipeline.

#include "arith.hpp"
#include "ast.hpp"
#include "ast_ops.hpp"
#include "check.hpp"
#include "driver.hpp"
#include "fm.hpp"
#include "lex.hpp"
#include "ode.hpp"
#include "parse.hpp"
#include "poly.hpp"
#include "print.hpp"
#include "rational.hpp"
#include "refine.hpp"
#include "reify.hpp"
#include "source.hpp"
#include "ssa.hpp"
