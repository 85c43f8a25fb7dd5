#pragma once
// Umbrella header: the whole kit in one include.

#include "ornet/common.hpp"
#include "ornet/tensor.hpp"
#include "ornet/conv.hpp"
#include "ornet/resample.hpp"
#include "ornet/fd.hpp"
#include "ornet/rfa.hpp"
#include "ornet/model.hpp"
#include "ornet/optim.hpp"
#include "ornet/plane.hpp"
#include "ornet/haar.hpp"
#include "ornet/metrics.hpp"
#include "ornet/image.hpp"
#include "ornet/data.hpp"
#include "ornet/config.hpp"
#include "ornet/train.hpp"
#include "ornet/ablate.hpp"
