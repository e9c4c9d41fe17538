#pragma once

#include "sdof/automaton.hpp"
#include "sdof/cli.hpp"
#include "sdof/context.hpp"
#include "sdof/dispatcher.hpp"
#include "sdof/evaluation.hpp"
#include "sdof/executor.hpp"
#include "sdof/harness.hpp"
#include "sdof/ids.hpp"
#include "sdof/json_util.hpp"
#include "sdof/memory.hpp"
#include "sdof/registry.hpp"
#include "sdof/router.hpp"
#include "sdof/scenarios.hpp"
