#pragma once

#include "fse/clipping.hpp"
#include "fse/core.hpp"
#include "fse/engine.hpp"
#include "fse/eval.hpp"
#include "fse/wav.hpp"
