#pragma once

#include "kergnn/checkpoint.hpp"
#include "kergnn/config.hpp"
#include "kergnn/error.hpp"
#include "kergnn/filter.hpp"
#include "kergnn/graph.hpp"
#include "kergnn/graph_file.hpp"
#include "kergnn/kernel.hpp"
#include "kergnn/model.hpp"
#include "kergnn/optim.hpp"
#include "kergnn/parallel.hpp"
#include "kergnn/trainer.hpp"
#include "kergnn/tudataset.hpp"
#include "kergnn/wl.hpp"
