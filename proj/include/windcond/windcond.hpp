#pragma once

#include "windcond/angle.hpp"
#include "windcond/bessel.hpp"
#include "windcond/bpqr.hpp"
#include "windcond/bwhr.hpp"
#include "windcond/circstats.hpp"
#include "windcond/commands.hpp"
#include "windcond/errors.hpp"
#include "windcond/estimators.hpp"
#include "windcond/fixtures.hpp"
#include "windcond/io.hpp"
#include "windcond/metrics.hpp"
#include "windcond/parallel.hpp"
#include "windcond/quadrature.hpp"
#include "windcond/resample.hpp"
#include "windcond/rng.hpp"
#include "windcond/synth.hpp"
#include "windcond/types.hpp"
#include "windcond/weibull.hpp"
