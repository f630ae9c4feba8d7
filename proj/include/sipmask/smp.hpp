#pragma once

#include <vector>

#include "sipmask/geometry.hpp"
#include "sipmask/tensor.hpp"

namespace sipmask {

// One detection entering mask assembly. Box is in image coordinates;
// coeffs holds k^2 blocks of m spatial coefficients (row-major sub-region
// order, matching subregion_grid).
struct Detection {
  Box box;
  double score = 0;
  int class_id = 0;
  std::vector<float> coeffs;
  // provenance of the source grid location (filled by inference)
  int level = -1;
  int loc_y = -1;
  int loc_x = -1;
};

struct InstanceMask {
  Tensor soft;    // h x w in [0,1], zero outside the box
  Tensor binary;  // h x w in {0,1}
  Box box;        // basis-pixel coordinates
  double score = 0;
  int class_id = 0;
};

struct SmpParams {
  int k = 2;
  int m = 32;
  double mask_thr = 0.5;
  // image pixels per basis pixel; boxes are divided by this before pruning
  double basis_stride = 1.0;
};

// sigma(B x C_i) for one sub-region: basis h x w x m against an m x p
// coefficient matrix, matrix product over the m axis then elementwise
// sigmoid. Returns h x w x p.
Tensor assemble_region_maps(const Tensor& basis, const Tensor& coeff_matrix);

// M_hat_j = sum_i prune(M_ij, region_i) with regions from
// subregion_grid(box, k). Box in basis-pixel coordinates.
Tensor assemble_instance(const Box& box, const std::vector<Tensor>& region_maps,
                         int k);

// 1 where soft >= tau (inclusive), else 0.
Tensor binarize(const Tensor& soft, double tau);

// Fused assembly with a reusable workspace: per detection, per sub-region,
// only pixels whose centers fall in the region are evaluated, and output
// buffers are recycled across calls with dirty-rectangle zeroing. Outputs
// are valid until the next assemble() call.
class SmpAssembler {
 public:
  const std::vector<InstanceMask>& assemble(const Tensor& basis,
                                            const std::vector<Detection>& dets,
                                            const SmpParams& prm);

 private:
  std::vector<InstanceMask> out_;
  std::vector<Box> dirty_;
};

// One-shot convenience wrapper over SmpAssembler.
std::vector<InstanceMask> assemble_masks(const Tensor& basis,
                                         const std::vector<Detection>& dets,
                                         const SmpParams& prm);

// Composition of the contract ops (region maps -> prune -> sum -> binarize);
// used to pin the fused path to the op-level route.
std::vector<InstanceMask> assemble_masks_via_region_maps(
    const Tensor& basis, const std::vector<Detection>& dets,
    const SmpParams& prm);

// Single-coefficient baseline (one coefficient set for the whole box):
// sigma(B x c_j), pruned to the box, binarized. The k=1 pipeline must be
// bit-identical to this.
InstanceMask single_coefficient_reference(const Tensor& basis,
                                          const Detection& det,
                                          const SmpParams& prm);

// Per-pixel scalar reference: for each detection and each pixel, find the
// pixel's sub-region, dot its basis vector with that region's coefficient in
// double precision, sigmoid, prune, threshold. No matrix ops, no layout
// tricks. This is the correctness reference for everything above.
std::vector<InstanceMask> smp_oracle(const Tensor& basis,
                                     const std::vector<Detection>& dets,
                                     const SmpParams& prm);

// Shared scalar sigmoid so the fused path and the op-level route stay
// bit-identical.
float sigmoid_f(float x);

}  // namespace sipmask
