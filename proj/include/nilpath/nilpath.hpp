#pragma once

#include "nilpath/cameron_martin.hpp"
#include "nilpath/error.hpp"
#include "nilpath/gaussian_sim.hpp"
#include "nilpath/group_metrics.hpp"
#include "nilpath/ldp_harness.hpp"
#include "nilpath/manifest.hpp"
#include "nilpath/parallel.hpp"
#include "nilpath/path_lift.hpp"
#include "nilpath/tensor_algebra.hpp"
