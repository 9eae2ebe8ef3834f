#pragma once

#include "atomic_query.hpp"
#include "config.hpp"
#include "grpo.hpp"
#include "harness.hpp"
#include "jsonl.hpp"
#include "reward.hpp"
#include "search_env.hpp"
#include "text_metrics.hpp"
#include "trainer.hpp"
#include "trajectory.hpp"
