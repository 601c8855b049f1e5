#pragma once

#include "symkit/aie.hpp"
#include "symkit/cec.hpp"
#include "symkit/common.hpp"
#include "symkit/config.hpp"
#include "symkit/convert.hpp"
#include "symkit/curation.hpp"
#include "symkit/geometry.hpp"
#include "symkit/metrics.hpp"
#include "symkit/ptr.hpp"
#include "symkit/simulator.hpp"
#include "symkit/tensor.hpp"
#include "symkit/weights_io.hpp"
