#pragma once

#include "symopt/constraints.hpp"
#include "symopt/errors.hpp"
#include "symopt/experiment.hpp"
#include "symopt/library.hpp"
#include "symopt/logits.hpp"
#include "symopt/policy.hpp"
#include "symopt/priors.hpp"
#include "symopt/rng.hpp"
#include "symopt/sampler.hpp"
#include "symopt/sr_task.hpp"
#include "symopt/traversal.hpp"
#include "symopt/units.hpp"
