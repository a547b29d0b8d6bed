#pragma once

#include "zfuse/error.hpp"
#include "zfuse/fusion.hpp"
#include "zfuse/image.hpp"
#include "zfuse/memory.hpp"
#include "zfuse/metrics.hpp"
#include "zfuse/multigrid.hpp"
#include "zfuse/params.hpp"
#include "zfuse/poisson.hpp"
#include "zfuse/smoothing.hpp"
#include "zfuse/spectral.hpp"
#include "zfuse/synthetic.hpp"
#include "zfuse/volume_io.hpp"
