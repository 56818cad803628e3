#pragma once

#include "idxalloc/asset.hpp"
#include "idxalloc/bench.hpp"
#include "idxalloc/core.hpp"
#include "idxalloc/golden.hpp"
#include "idxalloc/io.hpp"
#include "idxalloc/mdp.hpp"
#include "idxalloc/station.hpp"
