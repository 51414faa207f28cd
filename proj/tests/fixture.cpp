#include "fixture.hpp"

namespace testutil {

capgest::PipelineConfig small_config() {
  auto c = capgest::PipelineConfig::defaults();
  c.synth.gestures_per_user_per_class = 14;
  c.corrector.kernels = {capgest::KernelSpec::pca(9), capgest::KernelSpec::poly(3, 2)};
  c.corrector.min_support = 5;
  return c;
}

const SmallRun& small_run() {
  static const SmallRun run = [] {
    SmallRun r;
    r.config = small_config();
    r.recordings = capgest::load_or_generate(r.config);
    r.samples = capgest::build_sliding_set(r.recordings);
    r.split = capgest::split_by_user(r.samples, r.config.user_counts, r.config.split_seed,
                                     capgest::default_pinned_hold(r.samples));
    r.trained = capgest::train_pipeline(r.config, r.split, r.recordings.calibration);
    return r;
  }();
  return run;
}

}  // namespace testutil
