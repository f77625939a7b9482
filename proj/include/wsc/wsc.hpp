#pragma once

// Umbrella header: the whole walk-steered graph classification stack.

#include "wsc/coarsen.hpp"
#include "wsc/cv.hpp"
#include "wsc/error.hpp"
#include "wsc/gmm.hpp"
#include "wsc/graph.hpp"
#include "wsc/model.hpp"
#include "wsc/nn.hpp"
#include "wsc/report.hpp"
#include "wsc/rng.hpp"
#include "wsc/sweep.hpp"
#include "wsc/train.hpp"
#include "wsc/tu_io.hpp"
#include "wsc/walk.hpp"
#include "wsc/wsc_layer.hpp"
