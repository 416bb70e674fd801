#pragma once

#include "eqcorr/adaptation.hpp"
#include "eqcorr/core_model.hpp"
#include "eqcorr/decorrelation.hpp"
#include "eqcorr/lasso.hpp"
#include "eqcorr/mixture.hpp"
#include "eqcorr/mode.hpp"
#include "eqcorr/pipeline.hpp"
#include "eqcorr/rng.hpp"
#include "eqcorr/stats.hpp"
