#pragma once

#include "skgp/analysis.hpp"
#include "skgp/error.hpp"
#include "skgp/experiment.hpp"
#include "skgp/generator.hpp"
#include "skgp/gp.hpp"
#include "skgp/operators.hpp"
#include "skgp/parallel.hpp"
#include "skgp/phenotype.hpp"
#include "skgp/project.hpp"
#include "skgp/random.hpp"
#include "skgp/rules.hpp"
#include "skgp/simulator.hpp"
#include "skgp/state.hpp"
#include "skgp/stats.hpp"
#include "skgp/surrogate.hpp"
#include "skgp/tree.hpp"
