#pragma once

// Everything at once.

#include "curvadv/attack.hpp"
#include "curvadv/cloud.hpp"
#include "curvadv/config.hpp"
#include "curvadv/curvature.hpp"
#include "curvadv/errors.hpp"
#include "curvadv/experiment.hpp"
#include "curvadv/geometry.hpp"
#include "curvadv/io.hpp"
#include "curvadv/metrics.hpp"
#include "curvadv/neighbors.hpp"
#include "curvadv/random.hpp"
#include "curvadv/shapes.hpp"
#include "curvadv/tinynet.hpp"
