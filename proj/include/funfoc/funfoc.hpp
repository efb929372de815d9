#pragma once

#include "funfoc/corpus.hpp"
#include "funfoc/error.hpp"
#include "funfoc/eval_stats.hpp"
#include "funfoc/forwards_range.hpp"
#include "funfoc/io.hpp"
#include "funfoc/lexical_features.hpp"
#include "funfoc/phrase_miner.hpp"
#include "funfoc/pipeline.hpp"
#include "funfoc/synth.hpp"
#include "funfoc/textprep.hpp"
