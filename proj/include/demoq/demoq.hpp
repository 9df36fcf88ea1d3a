#pragma once

#include "demoq/compressor.hpp"
#include "demoq/embedding.hpp"
#include "demoq/errors.hpp"
#include "demoq/frame.hpp"
#include "demoq/harness.hpp"
#include "demoq/optim.hpp"
#include "demoq/quantizer.hpp"
#include "demoq/rng.hpp"
#include "demoq/simplex.hpp"
