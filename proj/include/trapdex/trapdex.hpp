#pragma once

#include "classify.hpp"
#include "core.hpp"
#include "evaluation.hpp"
#include "flat_index.hpp"
#include "geometry.hpp"
#include "ingest.hpp"
#include "store.hpp"
#include "zero_shot.hpp"
