#pragma once

#include "kolreg/bdm.hpp"
#include "kolreg/ctm.hpp"
#include "kolreg/data.hpp"
#include "kolreg/error.hpp"
#include "kolreg/experiment.hpp"
#include "kolreg/linkpred.hpp"
#include "kolreg/metrics.hpp"
#include "kolreg/random.hpp"
#include "kolreg/regularizer.hpp"
