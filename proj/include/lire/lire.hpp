#pragma once

#include "lire/dataset.hpp"
#include "lire/error.hpp"
#include "lire/golden_section.hpp"
#include "lire/model.hpp"
#include "lire/objective.hpp"
#include "lire/optimizer.hpp"
#include "lire/parallel.hpp"
#include "lire/pipeline.hpp"
#include "lire/rules.hpp"
#include "lire/tree_ensemble.hpp"
