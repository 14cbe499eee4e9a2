#pragma once

#include "threshkit/error.hpp"
#include "threshkit/csv.hpp"
#include "threshkit/date.hpp"
#include "threshkit/io.hpp"
#include "threshkit/dataset.hpp"
#include "threshkit/stats.hpp"
#include "threshkit/selection.hpp"
#include "threshkit/thresholds.hpp"
#include "threshkit/synth.hpp"
#include "threshkit/config.hpp"
#include "threshkit/format.hpp"
#include "threshkit/manifest.hpp"
#include "threshkit/commands.hpp"
