#pragma once

#include "isac/commands.hpp"
#include "isac/covariance.hpp"
#include "isac/csv.hpp"
#include "isac/dp.hpp"
#include "isac/errors.hpp"
#include "isac/estimators.hpp"
#include "isac/gains.hpp"
#include "isac/linalg.hpp"
#include "isac/manifest.hpp"
#include "isac/policy.hpp"
#include "isac/random.hpp"
#include "isac/scenario.hpp"
#include "isac/simulate.hpp"
#include "isac/version.hpp"
