#pragma once

#include "gcnlab/autodiff.hpp"
#include "gcnlab/common.hpp"
#include "gcnlab/data_io.hpp"
#include "gcnlab/diagnostics.hpp"
#include "gcnlab/graph.hpp"
#include "gcnlab/init.hpp"
#include "gcnlab/model.hpp"
#include "gcnlab/rewiring.hpp"
#include "gcnlab/training.hpp"
