#pragma once

#include "dialfilter/attributes.hpp"
#include "dialfilter/bayesopt.hpp"
#include "dialfilter/common.hpp"
#include "dialfilter/corpus.hpp"
#include "dialfilter/embed.hpp"
#include "dialfilter/evalmetrics.hpp"
#include "dialfilter/measure.hpp"
#include "dialfilter/ncm.hpp"
#include "dialfilter/pipeline.hpp"
#include "dialfilter/seqscore.hpp"
#include "dialfilter/synthgen.hpp"
