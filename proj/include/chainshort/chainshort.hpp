#pragma once

// Umbrella header: the whole library in one include.

#include "chainshort/backend.hpp"
#include "chainshort/cli.hpp"
#include "chainshort/config.hpp"
#include "chainshort/embedding.hpp"
#include "chainshort/errors.hpp"
#include "chainshort/evalkit.hpp"
#include "chainshort/graph.hpp"
#include "chainshort/mining.hpp"
#include "chainshort/net.hpp"
#include "chainshort/pipeline.hpp"
#include "chainshort/resources.hpp"
#include "chainshort/retrieval.hpp"
#include "chainshort/sandbox.hpp"
#include "chainshort/scoring.hpp"
#include "chainshort/serialize.hpp"
#include "chainshort/stats.hpp"
