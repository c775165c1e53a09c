#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ravit/backbone.hpp"

namespace ravit {

// Feature pyramid over the last three backbone stages: 1x1 laterals,
// nearest-neighbor top-down merging, then one multi-branch conv unit
// plus a biased pointwise per output level.
struct FpnLevelParams {
    Mat lateral_w; // width x Cin
    std::vector<float> lateral_b;
    DwSite smooth_dw; // k=7, width, stride 1
    Mat smooth_pw;    // width x width
    std::vector<float> smooth_pw_b;
};

struct RepFpnParams {
    int width = 128;
    std::array<FpnLevelParams, 3> levels; // strides 8, 16, 32
};

std::array<Tensor4, 3> repfpn_forward(const PyramidFeatures& feats,
                                      const RepFpnParams& fpn);

// Anchor-free single-stage head: two shared conv towers, per-level
// learnable scales on the box branch.
struct DetHeadParams {
    int width = 128;
    int num_classes = 80;
    std::vector<ConvFull> cls_tower; // 3x3, width -> width, biased
    std::vector<ConvFull> box_tower;
    ConvFull cls_out; // 3x3 -> num_classes
    ConvFull box_out; // 3x3 -> 4 (left, top, right, bottom)
    ConvFull ctr_out; // 3x3 -> 1
    std::vector<float> scales; // one per level, on the box distances
};

struct RawLevel {
    int stride = 0;
    float scale = 1.f;
    Tensor4 cls; // logits, H x W x num_classes
    Tensor4 box; // raw distances, H x W x 4
    Tensor4 ctr; // logit, H x W x 1
};

std::array<RawLevel, 3> det_head_forward(const std::array<Tensor4, 3>& feats,
                                         const DetHeadParams& head);

struct Detector {
    Model backbone; // built without the classifier head
    RepFpnParams fpn;
    DetHeadParams head;
    uint64_t seed = 0;
    bool fused = false;
};

Detector build_detector(const VariantConfig& cfg, uint64_t seed, int num_classes = 80);
void fuse_detector(Detector& det);
CountReport count_detector(const Detector& det, int input_h = 1280, int input_w = 704);
std::vector<TensorRef> detector_tensors(Detector& det);

struct Detection {
    int cls = 0;
    float score = 0.f;
    float x1 = 0.f, y1 = 0.f, x2 = 0.f, y2 = 0.f;
};

// Training-time level assignment by the largest regression distance:
// (0,128] -> 0, (128,256] -> 1, (256,512] -> 2, else -1.
int assign_level(float max_distance);

// sqrt of the product of side ratios; 1 at the box center.
float centerness(float l, float t, float r, float b);

float sigmoid_apx(float x);

// Per-location decode of one level: distances are exp(scale * raw) in
// pixels around the cell center, boxes clipped to the original extent.
// Keeps scores above score_thresh, at most top_k per level.
std::vector<Detection> decode_level(const RawLevel& level, int orig_w, int orig_h,
                                    float score_thresh, int top_k);

// Greedy per-class suppression; candidates are ranked by score with
// ties broken by input order, at most max_out survive.
std::vector<Detection> nms(const std::vector<Detection>& dets, float iou_thresh,
                           int max_out);

float box_iou(const Detection& a, const Detection& b);

struct DetectOptions {
    float score_thresh = 0.05f;
    float iou_thresh = 0.6f;
    int top_k_per_level = 1000;
    int max_detections = 100;
};

// Full pipeline on a normalized 1 x H x W x 3 image: pad bottom/right to
// a multiple of 32, run backbone, pyramid and head, decode and suppress.
std::vector<Detection> detect(const Detector& det, const Tensor4& image,
                              const DetectOptions& opt = {});

} // namespace ravit
