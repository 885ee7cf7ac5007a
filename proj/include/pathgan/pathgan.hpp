#pragma once

#include "pathgan/core/error.hpp"
#include "pathgan/core/digest.hpp"
#include "pathgan/core/tensor.hpp"
#include "pathgan/core/autograd.hpp"
#include "pathgan/core/ops.hpp"
#include "pathgan/core/image.hpp"
#include "pathgan/core/png.hpp"
#include "pathgan/data/tissue.hpp"
#include "pathgan/data/synth.hpp"
#include "pathgan/data/dataset.hpp"
#include "pathgan/model/config.hpp"
#include "pathgan/model/params.hpp"
#include "pathgan/model/networks.hpp"
#include "pathgan/model/gan.hpp"
#include "pathgan/model/checkpoint.hpp"
#include "pathgan/train/spectral_norm.hpp"
#include "pathgan/train/orthogonal.hpp"
#include "pathgan/train/losses.hpp"
#include "pathgan/train/adam.hpp"
#include "pathgan/train/config.hpp"
#include "pathgan/train/trainer.hpp"
#include "pathgan/features/feature_matrix.hpp"
#include "pathgan/features/extractors.hpp"
#include "pathgan/metrics/frechet.hpp"
#include "pathgan/metrics/kid.hpp"
#include "pathgan/metrics/one_nn.hpp"
#include "pathgan/metrics/roc.hpp"
#include "pathgan/metrics/report.hpp"
#include "pathgan/metrics/experiments.hpp"
#include "pathgan/metrics/plot.hpp"
#include "pathgan/latent/analysis.hpp"
#include "pathgan/latent/atlas.hpp"
#include "pathgan/service/schema.hpp"
#include "pathgan/service/study.hpp"
#include "pathgan/service/server.hpp"
