#pragma once

#include "alimit/classifiers.hpp"
#include "alimit/core.hpp"
#include "alimit/density_limit.hpp"
#include "alimit/dsc_datagen.hpp"
#include "alimit/embeddings.hpp"
#include "alimit/features.hpp"
#include "alimit/io.hpp"
#include "alimit/metrics.hpp"
#include "alimit/neuralnet.hpp"
#include "alimit/serialize.hpp"
