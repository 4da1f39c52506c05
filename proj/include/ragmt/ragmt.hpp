#pragma once

#include "ragmt/backend.hpp"
#include "ragmt/corpus.hpp"
#include "ragmt/error.hpp"
#include "ragmt/metrics.hpp"
#include "ragmt/pipeline.hpp"
#include "ragmt/postprocess.hpp"
#include "ragmt/promptkit.hpp"
#include "ragmt/retrieval.hpp"
#include "ragmt/sweep.hpp"
#include "ragmt/unicode.hpp"
