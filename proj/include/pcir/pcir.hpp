#pragma once

// Umbrella header for the whole library.

#include "pcir/baselines.hpp"
#include "pcir/channel.hpp"
#include "pcir/exact_em.hpp"
#include "pcir/experiment.hpp"
#include "pcir/field_csv.hpp"
#include "pcir/fixtures.hpp"
#include "pcir/gmrf.hpp"
#include "pcir/grid.hpp"
#include "pcir/image_ops.hpp"
#include "pcir/io_util.hpp"
#include "pcir/latent.hpp"
#include "pcir/lbp.hpp"
#include "pcir/lbp_em.hpp"
#include "pcir/metrics.hpp"
#include "pcir/pgm.hpp"
#include "pcir/rng.hpp"
