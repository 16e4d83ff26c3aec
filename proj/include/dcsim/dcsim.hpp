#pragma once

#include "dcsim/anchor.hpp"
#include "dcsim/datasets.hpp"
#include "dcsim/error.hpp"
#include "dcsim/experiment.hpp"
#include "dcsim/linalg.hpp"
#include "dcsim/matrix.hpp"
#include "dcsim/metrics.hpp"
#include "dcsim/models.hpp"
#include "dcsim/protocol.hpp"
#include "dcsim/random.hpp"
