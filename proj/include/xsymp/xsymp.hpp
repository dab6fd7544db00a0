#pragma once

#include "autodiff.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "flows.hpp"
#include "integrators.hpp"
#include "phase.hpp"
#include "problems.hpp"
#include "record.hpp"
#include "state.hpp"
#include "studies.hpp"
#include "version.hpp"
