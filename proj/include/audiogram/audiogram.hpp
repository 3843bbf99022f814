#pragma once

#include "audiogram/detect.hpp"
#include "audiogram/detection.hpp"
#include "audiogram/errors.hpp"
#include "audiogram/eval.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/grid.hpp"
#include "audiogram/image.hpp"
#include "audiogram/imgproc.hpp"
#include "audiogram/interpret.hpp"
#include "audiogram/pipeline.hpp"
#include "audiogram/png_io.hpp"
#include "audiogram/rectify.hpp"
#include "audiogram/serialize.hpp"
#include "audiogram/synthgen.hpp"
