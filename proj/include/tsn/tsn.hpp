#pragma once

#include "tsn/aggregation.hpp"
#include "tsn/audio.hpp"
#include "tsn/core.hpp"
#include "tsn/encoding.hpp"
#include "tsn/error.hpp"
#include "tsn/fusion.hpp"
#include "tsn/matrix.hpp"
#include "tsn/metrics.hpp"
#include "tsn/netmodel.hpp"
#include "tsn/pipeline.hpp"
#include "tsn/random.hpp"
#include "tsn/sampling.hpp"
#include "tsn/synthgen.hpp"
