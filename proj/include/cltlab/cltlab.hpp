#pragma once

#include "cltlab/common.hpp"
#include "cltlab/dist.hpp"
#include "cltlab/edgeworth.hpp"
#include "cltlab/fft.hpp"
#include "cltlab/grid.hpp"
#include "cltlab/info.hpp"
#include "cltlab/ratelab.hpp"
#include "cltlab/stein.hpp"
#include "cltlab/verify.hpp"
