#pragma once

#include <string>

#include "sipmask/evaluation.hpp"
#include "sipmask/heads.hpp"
#include "sipmask/train_loss.hpp"

namespace sipmask {

// SGD with momentum: v = mu*v + g; p -= lr*v.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(ParamStore<float>& params);
  void step(double lr, double momentum);
  std::vector<Tensor>& buffers() { return velocity_; }

 private:
  ParamStore<float>& params_;
  std::vector<Tensor> velocity_;
};

uint64_t derive_seed(uint64_t base, uint64_t salt);

// Deterministic seeds for the i-th train/eval scene of a run.
uint64_t train_scene_seed(uint64_t base, int index);
uint64_t eval_scene_seed(uint64_t base, int index);

SceneGenParams scene_params_from(const Config& cfg);

void save_checkpoint(const std::string& path, const SipMaskModel<float>& model,
                     const SgdOptimizer& opt, int step);
// Returns the stored step. Throws on shape/name mismatches.
int load_checkpoint(const std::string& path, SipMaskModel<float>& model,
                    SgdOptimizer& opt);
int load_checkpoint(const std::string& path, SipMaskModel<float>& model);

struct TrainOutcome {
  LossReport first;
  LossReport last;
  int final_step = 0;
  std::string checkpoint_path;
};

// Runs cfg.steps SGD steps over the deterministic synthetic stream, writing
// loss.csv, periodic checkpoints, a scene preview, and checkpoint.tc under
// out_dir. Resuming from a checkpoint reproduces the unresumed trajectory
// bit for bit (scene order and subsampling are stateless in the step index).
TrainOutcome train_model(const Config& cfg, const std::string& out_dir,
                         const std::string& resume_path = "");

// Mask AP of a model over freshly generated eval scenes.
APReport evaluate_model(const SipMaskModel<float>& model, const Config& cfg,
                        int n_scenes);

}  // namespace sipmask
