#pragma once

// Convenience umbrella for the whole library.

#include "belief.hpp"
#include "engines.hpp"
#include "harness.hpp"
#include "joint.hpp"
#include "maxent.hpp"
#include "metrics.hpp"
#include "rules.hpp"
