#pragma once

#include "stochabound/certify.hpp"
#include "stochabound/errors.hpp"
#include "stochabound/io.hpp"
#include "stochabound/kernel.hpp"
#include "stochabound/linalg.hpp"
#include "stochabound/montecarlo.hpp"
#include "stochabound/rng.hpp"
#include "stochabound/sde.hpp"
