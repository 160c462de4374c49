#pragma once

#include "siads/detector.hpp"
#include "siads/error.hpp"
#include "siads/eval.hpp"
#include "siads/ingest.hpp"
#include "siads/inject.hpp"
#include "siads/lut.hpp"
#include "siads/quantizer.hpp"
#include "siads/rng.hpp"
#include "siads/simatrix.hpp"
