#pragma once

#include <dasco/algorithms.hpp>
#include <dasco/compressors.hpp>
#include <dasco/core.hpp>
#include <dasco/experiment.hpp>
#include <dasco/metrics.hpp>
#include <dasco/network.hpp>
#include <dasco/problem.hpp>
#include <dasco/random.hpp>
#include <dasco/rl_instance.hpp>
#include <dasco/run.hpp>
