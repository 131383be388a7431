#pragma once

// Umbrella header.

#include "dropstereo/core.hpp"
#include "dropstereo/solver.hpp"
#include "dropstereo/optics.hpp"
#include "dropstereo/raytrace.hpp"
#include "dropstereo/render.hpp"
#include "dropstereo/splat.hpp"
#include "dropstereo/dewarp.hpp"
#include "dropstereo/volume.hpp"
#include "dropstereo/stereo.hpp"
#include "dropstereo/rectify.hpp"
#include "dropstereo/detect.hpp"
#include "dropstereo/synthetic.hpp"
#include "dropstereo/formats.hpp"
#include "dropstereo/evaluate.hpp"
#include "dropstereo/config.hpp"
