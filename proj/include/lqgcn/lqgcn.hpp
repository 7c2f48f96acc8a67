#pragma once

// Core library. io/record/cli/digest are opt-in: they pull in the JSON, CLI
// and OpenSSL dependencies.

#include "lqgcn/affiliation.hpp"
#include "lqgcn/cover.hpp"
#include "lqgcn/dense.hpp"
#include "lqgcn/error.hpp"
#include "lqgcn/features.hpp"
#include "lqgcn/graph.hpp"
#include "lqgcn/kernels.hpp"
#include "lqgcn/losses.hpp"
#include "lqgcn/metrics.hpp"
#include "lqgcn/model.hpp"
#include "lqgcn/rng.hpp"
#include "lqgcn/sparse.hpp"
#include "lqgcn/synthetic.hpp"
#include "lqgcn/trainer.hpp"
