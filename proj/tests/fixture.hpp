#pragma once

#include "capgest/dataset_io.hpp"
#include "capgest/pipeline.hpp"

namespace testutil {

// A small synthetic run shared by the cascade and pipeline tests.
struct SmallRun {
  capgest::PipelineConfig config;
  capgest::RecordingSet recordings;
  capgest::LabeledSet samples;
  capgest::DatasetSplit split;
  capgest::TrainResult trained;
};

capgest::PipelineConfig small_config();
const SmallRun& small_run();

}  // namespace testutil
