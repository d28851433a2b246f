#pragma once

#include "crexlab/discrimination.hpp"
#include "crexlab/distributions.hpp"
#include "crexlab/error.hpp"
#include "crexlab/estimators.hpp"
#include "crexlab/measures.hpp"
#include "crexlab/quadrature.hpp"
#include "crexlab/rng.hpp"
#include "crexlab/sampling.hpp"
#include "crexlab/simulation.hpp"
