#pragma once

#include "lstmbt/anomaly_detector.hpp"
#include "lstmbt/backtester.hpp"
#include "lstmbt/checkpoint.hpp"
#include "lstmbt/decimal.hpp"
#include "lstmbt/market_data.hpp"
#include "lstmbt/nn/adam.hpp"
#include "lstmbt/nn/layers.hpp"
#include "lstmbt/nn/lstm.hpp"
#include "lstmbt/nn/models.hpp"
#include "lstmbt/nn/train.hpp"
#include "lstmbt/pipeline.hpp"
#include "lstmbt/preprocess.hpp"
#include "lstmbt/price_predictor.hpp"
#include "lstmbt/reporting.hpp"
