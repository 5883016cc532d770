#pragma once

// Core library. JSON artifacts live in xflow/io.hpp (needs nlohmann/json).

#include "xflow/dataset.hpp"
#include "xflow/parallel.hpp"
#include "xflow/preaggregate.hpp"
#include "xflow/render.hpp"
#include "xflow/rng.hpp"
#include "xflow/scan.hpp"
#include "xflow/select.hpp"
#include "xflow/significance.hpp"
#include "xflow/synth.hpp"
