#pragma once

// Umbrella header: the manifold/optimizer library plus the experiment harness.

#include "rspg/errors.hpp"
#include "rspg/estimators.hpp"
#include "rspg/io/config.hpp"
#include "rspg/io/experiment.hpp"
#include "rspg/io/matrix_io.hpp"
#include "rspg/manifold.hpp"
#include "rspg/metrics.hpp"
#include "rspg/nonsmooth.hpp"
#include "rspg/optimizers.hpp"
#include "rspg/problems/robust_mc.hpp"
#include "rspg/problems/sparse_pca.hpp"
#include "rspg/problems/synth.hpp"
#include "rspg/rng.hpp"
#include "rspg/subproblem.hpp"
#include "rspg/validation/gradient_check.hpp"
#include "rspg/validation/oracle_suite.hpp"
#include "rspg/validation/subproblem_oracle.hpp"
#include "rspg/version.hpp"
