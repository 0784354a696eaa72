#pragma once

// Umbrella header for the whole library.

#include "anomaly/core/error.hpp"
#include "anomaly/core/rng.hpp"
#include "anomaly/data/image.hpp"
#include "anomaly/data/loader.hpp"
#include "anomaly/data/manifest.hpp"
#include "anomaly/data/noise.hpp"
#include "anomaly/data/pnm.hpp"
#include "anomaly/data/preprocess.hpp"
#include "anomaly/data/split.hpp"
#include "anomaly/data/synthetic.hpp"
#include "anomaly/gan/dcgan.hpp"
#include "anomaly/gan/toy.hpp"
#include "anomaly/metrics/classification.hpp"
#include "anomaly/metrics/histogram.hpp"
#include "anomaly/metrics/report.hpp"
#include "anomaly/nn/model.hpp"
#include "anomaly/nn/serialize.hpp"
#include "anomaly/pipelines/architectures.hpp"
#include "anomaly/pipelines/detector.hpp"
#include "anomaly/pipelines/kde.hpp"
#include "anomaly/pipelines/scoring.hpp"
#include "anomaly/pipelines/ssim.hpp"
#include "anomaly/pipelines/train.hpp"
