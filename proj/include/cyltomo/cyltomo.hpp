#pragma once

#include "errors.hpp"
#include "parallel.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "image.hpp"
#include "phantom.hpp"
#include "projector.hpp"
#include "recon.hpp"
#include "imgproc.hpp"
#include "posefit.hpp"
#include "mtf.hpp"
#include "io.hpp"
#include "experiments.hpp"
