#include "sipmask/losses.hpp"

namespace sipmask {

double mask_loss_value(const std::vector<Tensor>& soft_masks,
                       const std::vector<Tensor>& gt_masks,
                       const std::vector<Box>& gt_boxes,
                       const std::vector<double>& alphas, int n_pos) {
  SIP_CHECK(soft_masks.size() == gt_masks.size() &&
                soft_masks.size() == gt_boxes.size() &&
                soft_masks.size() == alphas.size(),
            "mask_loss_value input count mismatch");
  double total = 0;
  for (size_t j = 0; j < soft_masks.size(); ++j) {
    const Tensor& soft = soft_masks[j];
    const Tensor& gt = gt_masks[j];
    SIP_CHECK(soft.same_shape(gt), "mask/gt shape mismatch");
    const int h = soft.dim(0), w = soft.dim(1);
    double acc = 0;
    size_t n = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!gt_boxes[j].contains_center(x + 0.5, y + 0.5)) continue;
        const double p =
            std::min(1.0 - 1e-7, std::max(1e-7, static_cast<double>(soft.at(y, x))));
        const double t = gt.at(y, x);
        acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
        ++n;
      }
    }
    SIP_CHECK(n > 0, "empty gt box in mask loss");
    total += alphas[j] * (acc / static_cast<double>(n));
  }
  return total / std::max(n_pos, 1);
}

}  // namespace sipmask
