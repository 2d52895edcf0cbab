#pragma once

#include "shadowfit/bench.hpp"
#include "shadowfit/core.hpp"
#include "shadowfit/hand_rig.hpp"
#include "shadowfit/hypothesis.hpp"
#include "shadowfit/image.hpp"
#include "shadowfit/image_io.hpp"
#include "shadowfit/io.hpp"
#include "shadowfit/metrics.hpp"
#include "shadowfit/objective.hpp"
#include "shadowfit/refine.hpp"
#include "shadowfit/renderer.hpp"
#include "shadowfit/rotation.hpp"
#include "shadowfit/synth.hpp"
#include "shadowfit/version.hpp"
