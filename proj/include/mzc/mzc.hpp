#pragma once

#include <mzc/analysis.hpp>
#include <mzc/ccu.hpp>
#include <mzc/config.hpp>
#include <mzc/detection.hpp>
#include <mzc/envelope_fit.hpp>
#include <mzc/error.hpp>
#include <mzc/interferometer.hpp>
#include <mzc/manifest.hpp>
#include <mzc/pipeline.hpp>
#include <mzc/random.hpp>
#include <mzc/report.hpp>
#include <mzc/source_model.hpp>
#include <mzc/trace_io.hpp>
