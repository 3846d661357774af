#pragma once

#include "murln/errors.hpp"
#include "murln/scene_model.hpp"
#include "murln/pair_generator.hpp"
#include "murln/features.hpp"
#include "murln/neural_core.hpp"
#include "murln/model.hpp"
#include "murln/checkpoint.hpp"
#include "murln/inference_eval.hpp"
#include "murln/dataset_io.hpp"
#include "murln/synthetic.hpp"
#include "murln/pipeline.hpp"
