#pragma once

#include "rangefuse/bench.hpp"
#include "rangefuse/calibration.hpp"
#include "rangefuse/error.hpp"
#include "rangefuse/eval.hpp"
#include "rangefuse/feature_grid.hpp"
#include "rangefuse/fusion.hpp"
#include "rangefuse/io.hpp"
#include "rangefuse/pointcloud.hpp"
#include "rangefuse/projection.hpp"
#include "rangefuse/range_image.hpp"
#include "rangefuse/render.hpp"
#include "rangefuse/sampling.hpp"
#include "rangefuse/spline.hpp"
#include "rangefuse/synthetic.hpp"
