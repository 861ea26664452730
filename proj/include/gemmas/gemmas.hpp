#pragma once

#include "gemmas/answer.hpp"
#include "gemmas/embedding.hpp"
#include "gemmas/error.hpp"
#include "gemmas/metrics.hpp"
#include "gemmas/report.hpp"
#include "gemmas/text_features.hpp"
#include "gemmas/trace_io.hpp"
#include "gemmas/trace_model.hpp"
