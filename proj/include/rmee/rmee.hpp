#pragma once

#include "rmee/bench.hpp"
#include "rmee/core.hpp"
#include "rmee/criteria.hpp"
#include "rmee/data.hpp"
#include "rmee/hq_optimizer.hpp"
#include "rmee/kernel_density.hpp"
#include "rmee/models.hpp"
#include "rmee/quantization.hpp"
