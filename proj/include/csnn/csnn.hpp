#ifndef CSNN_CSNN_HPP
#define CSNN_CSNN_HPP

#include "csnn/arch.hpp"
#include "csnn/bn_fusion.hpp"
#include "csnn/clip.hpp"
#include "csnn/config.hpp"
#include "csnn/converter.hpp"
#include "csnn/dataset.hpp"
#include "csnn/error.hpp"
#include "csnn/graph.hpp"
#include "csnn/layers.hpp"
#include "csnn/loss.hpp"
#include "csnn/model_io.hpp"
#include "csnn/snn.hpp"
#include "csnn/sweep.hpp"
#include "csnn/synth.hpp"
#include "csnn/tensor.hpp"
#include "csnn/trainer.hpp"

#endif
