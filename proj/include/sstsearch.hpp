#pragma once

#include "sstsearch/common.hpp"
#include "sstsearch/tree.hpp"
#include "sstsearch/corpus.hpp"
#include "sstsearch/minilang.hpp"
#include "sstsearch/sst.hpp"
#include "sstsearch/serialize.hpp"
#include "sstsearch/coverage.hpp"
#include "sstsearch/tensor.hpp"
#include "sstsearch/encoder.hpp"
#include "sstsearch/loss.hpp"
#include "sstsearch/metrics.hpp"
#include "sstsearch/representation.hpp"
#include "sstsearch/model.hpp"
#include "sstsearch/search.hpp"
#include "sstsearch/eval.hpp"
