#pragma once

#include "frgnn/bundle.hpp"
#include "frgnn/config.hpp"
#include "frgnn/dense.hpp"
#include "frgnn/error.hpp"
#include "frgnn/experiment.hpp"
#include "frgnn/fr.hpp"
#include "frgnn/gradcheck.hpp"
#include "frgnn/graph.hpp"
#include "frgnn/linalg.hpp"
#include "frgnn/loss.hpp"
#include "frgnn/metrics.hpp"
#include "frgnn/mlp.hpp"
#include "frgnn/models.hpp"
#include "frgnn/optim.hpp"
#include "frgnn/params.hpp"
#include "frgnn/report.hpp"
#include "frgnn/rng.hpp"
#include "frgnn/sampler.hpp"
#include "frgnn/splits.hpp"
#include "frgnn/theory.hpp"
#include "frgnn/training.hpp"
