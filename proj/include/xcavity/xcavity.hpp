#pragma once

// Umbrella header for the x-ray thin-film cavity solvers.

#include "xcavity/common.hpp"
#include "xcavity/core_stack.hpp"
#include "xcavity/dispersion.hpp"
#include "xcavity/fit.hpp"
#include "xcavity/greens_model.hpp"
#include "xcavity/io.hpp"
#include "xcavity/matrix_model.hpp"
#include "xcavity/parratt.hpp"
#include "xcavity/scan_fit.hpp"
#include "xcavity/xas_fit.hpp"
