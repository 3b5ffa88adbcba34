#pragma once

#include "ctg/adapters.hpp"
#include "ctg/autodiff.hpp"
#include "ctg/checkpoint.hpp"
#include "ctg/clause_seg.hpp"
#include "ctg/config.hpp"
#include "ctg/dataset.hpp"
#include "ctg/eval.hpp"
#include "ctg/event_repr.hpp"
#include "ctg/experiment.hpp"
#include "ctg/grounding.hpp"
#include "ctg/inference.hpp"
#include "ctg/model.hpp"
#include "ctg/nn.hpp"
#include "ctg/synthdata.hpp"
#include "ctg/tensor.hpp"
#include "ctg/training.hpp"
#include "ctg/video_repr.hpp"
