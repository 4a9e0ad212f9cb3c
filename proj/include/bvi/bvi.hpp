#pragma once

#include "besov.hpp"
#include "darcy.hpp"
#include "experiment.hpp"
#include "forward.hpp"
#include "io.hpp"
#include "link.hpp"
#include "observation.hpp"
#include "pcn.hpp"
#include "pexp.hpp"
#include "subdiffusion.hpp"
#include "vi.hpp"
#include "wavelet.hpp"
