#pragma once

#include "nhkpm/eigensolver.hpp"
#include "nhkpm/grid.hpp"
#include "nhkpm/kpm.hpp"
#include "nhkpm/operators.hpp"
#include "nhkpm/peaks.hpp"
#include "nhkpm/spectral.hpp"
#include "nhkpm/types.hpp"
#include "nhkpm/version.hpp"
