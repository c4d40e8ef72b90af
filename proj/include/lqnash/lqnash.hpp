#pragma once

#include "lqnash/diagnostics.hpp"
#include "lqnash/errors.hpp"
#include "lqnash/game.hpp"
#include "lqnash/generate.hpp"
#include "lqnash/inner.hpp"
#include "lqnash/io.hpp"
#include "lqnash/linalg.hpp"
#include "lqnash/outer.hpp"
