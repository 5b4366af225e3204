#pragma once

#include "ensembleguard/boosting.hpp"
#include "ensembleguard/cart.hpp"
#include "ensembleguard/common.hpp"
#include "ensembleguard/config.hpp"
#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/digest.hpp"
#include "ensembleguard/evaluation.hpp"
#include "ensembleguard/explainability.hpp"
#include "ensembleguard/meta_ensemble.hpp"
#include "ensembleguard/preprocess.hpp"
#include "ensembleguard/recurrent.hpp"
#include "ensembleguard/rng.hpp"
#include "ensembleguard/runner.hpp"
#include "ensembleguard/synthetic.hpp"
#include "ensembleguard/tree.hpp"
#include "ensembleguard/tree_growth.hpp"
