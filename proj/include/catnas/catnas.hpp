#pragma once

#include "catnas/cost_model.hpp"
#include "catnas/distribution.hpp"
#include "catnas/optimizer.hpp"
#include "catnas/random.hpp"
#include "catnas/runner.hpp"
#include "catnas/search_space.hpp"
#include "catnas/supernet.hpp"
#include "catnas/table_objective.hpp"
#include "catnas/utility.hpp"
