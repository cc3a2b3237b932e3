#pragma once

#include "floquet/bundle.hpp"
#include "floquet/coefficient_hull.hpp"
#include "floquet/config.hpp"
#include "floquet/elliptic_operator.hpp"
#include "floquet/error.hpp"
#include "floquet/hilbert_metric.hpp"
#include "floquet/mesh.hpp"
#include "floquet/positivity.hpp"
#include "floquet/propagation.hpp"
#include "floquet/random.hpp"
#include "floquet/report.hpp"
#include "floquet/toml_subset.hpp"
