#pragma once

#include "common.hpp"
#include "config.hpp"
#include "core.hpp"
#include "econometrics/designs.hpp"
#include "econometrics/mortality.hpp"
#include "econometrics/regression.hpp"
#include "io.hpp"
#include "optimizer.hpp"
#include "popgen.hpp"
#include "rng.hpp"
#include "welfare.hpp"
