#pragma once

#include "pcdtest/error.hpp"
#include "pcdtest/random.hpp"
#include "pcdtest/parallel.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/eigensystem.hpp"
#include "pcdtest/weighting.hpp"
#include "pcdtest/empirical_process.hpp"
#include "pcdtest/statistics.hpp"
#include "pcdtest/bootstrap.hpp"
#include "pcdtest/selection.hpp"
#include "pcdtest/simulation.hpp"
#include "pcdtest/io.hpp"
#include "pcdtest/report.hpp"
