#pragma once

#include "logcg/analytic.hpp"
#include "logcg/detect.hpp"
#include "logcg/error.hpp"
#include "logcg/evaluate.hpp"
#include "logcg/io.hpp"
#include "logcg/log_filter.hpp"
#include "logcg/phantom.hpp"
#include "logcg/scale_plan.hpp"
#include "logcg/volume.hpp"
