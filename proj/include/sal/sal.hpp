#pragma once

// Umbrella header for the whole toolkit.

#include "sal/adversary.hpp"
#include "sal/baselines.hpp"
#include "sal/certificate.hpp"
#include "sal/common.hpp"
#include "sal/cost.hpp"
#include "sal/datagen.hpp"
#include "sal/dataio.hpp"
#include "sal/dataset.hpp"
#include "sal/evalx.hpp"
#include "sal/experiment.hpp"
#include "sal/model.hpp"
#include "sal/sal_trainer.hpp"
