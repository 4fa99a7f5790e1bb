#pragma once

// Umbrella header.

#include "kalgain/errors.hpp"
#include "kalgain/harness.hpp"
#include "kalgain/kalman.hpp"
#include "kalgain/matquad.hpp"
#include "kalgain/model_io.hpp"
#include "kalgain/objective.hpp"
#include "kalgain/optimizer.hpp"
#include "kalgain/policy.hpp"
#include "kalgain/rng.hpp"
#include "kalgain/sgd_estimator.hpp"
#include "kalgain/sysmodel.hpp"
