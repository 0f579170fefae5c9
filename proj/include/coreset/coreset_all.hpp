#pragma once

// Umbrella header.
#include "coreset/codec.hpp"
#include "coreset/container.hpp"
#include "coreset/coreset.hpp"
#include "coreset/decomp.hpp"
#include "coreset/error.hpp"
#include "coreset/inference.hpp"
#include "coreset/model_io.hpp"
#include "coreset/network.hpp"
#include "coreset/pipeline.hpp"
#include "coreset/pruning.hpp"
#include "coreset/quantize.hpp"
#include "coreset/tensor.hpp"
