#pragma once

#include "latentlab/binary_io.hpp"
#include "latentlab/clustering.hpp"
#include "latentlab/codebook.hpp"
#include "latentlab/error.hpp"
#include "latentlab/image.hpp"
#include "latentlab/nn.hpp"
#include "latentlab/pipeline.hpp"
#include "latentlab/recommend.hpp"
#include "latentlab/retrieval.hpp"
#include "latentlab/service.hpp"
#include "latentlab/synthdata.hpp"
#include "latentlab/vae.hpp"
