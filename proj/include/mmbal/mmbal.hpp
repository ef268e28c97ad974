// Umbrella header.
#pragma once

#include "mmbal/checkpoint.hpp"
#include "mmbal/common.hpp"
#include "mmbal/config.hpp"
#include "mmbal/datagen.hpp"
#include "mmbal/fusion.hpp"
#include "mmbal/grad_check.hpp"
#include "mmbal/loss.hpp"
#include "mmbal/matrix.hpp"
#include "mmbal/metrics.hpp"
#include "mmbal/mlp.hpp"
#include "mmbal/modulation.hpp"
#include "mmbal/optimizer.hpp"
#include "mmbal/probe.hpp"
#include "mmbal/rng.hpp"
#include "mmbal/runlog.hpp"
#include "mmbal/trainer.hpp"
