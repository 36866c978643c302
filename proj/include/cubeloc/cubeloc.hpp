#pragma once

#include "cubeloc/audits.hpp"
#include "cubeloc/common.hpp"
#include "cubeloc/coupling.hpp"
#include "cubeloc/fastmath.hpp"
#include "cubeloc/fourier.hpp"
#include "cubeloc/hypercube.hpp"
#include "cubeloc/localization.hpp"
#include "cubeloc/log_laplace.hpp"
#include "cubeloc/measure.hpp"
#include "cubeloc/parallel.hpp"
#include "cubeloc/report.hpp"
#include "cubeloc/rng.hpp"
#include "cubeloc/wasserstein.hpp"
