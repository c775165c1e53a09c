#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ravit/blocks.hpp"

namespace ravit {

struct StageConfig {
    int width = 0;
    int depth = 0;
    MixerKind mixer = MixerKind::RepMSDW;
    int kernel = 3; // mixer conv extent
};

struct VariantConfig {
    std::string name;
    std::vector<int> stem_widths; // stride-2 conv ladder; last equals stages[0].width
    std::vector<StageConfig> stages;
    int head_hidden = 1280;
};

// Named presets: t26, s22, s26, m26 and the ablation forms v1..v5.
VariantConfig variant_config(const std::string& name);
std::vector<std::string> variant_names();

struct Model {
    VariantConfig cfg;
    uint64_t seed = 0;
    bool fused = false;
    int num_classes = 1000;
    bool has_head = true;

    std::vector<StemLayer> stem;
    std::vector<std::vector<BlockParams>> stages;
    std::vector<DownsampleParams> downsamples; // between consecutive stages
    HeadParams head;
};

// Deterministic seeded build; same seed gives a bitwise-identical model.
Model build_model(const VariantConfig& cfg, uint64_t seed,
                  int num_classes = 1000, bool with_head = true);

// Runs stem and all stages; optionally records each stage output.
Tensor4 backbone_forward(const Model& m, const Tensor4& x,
                         std::vector<Tensor4>* stage_outs = nullptr);

Mat backbone_logits(const Model& m, const Tensor4& x);

// Stage outputs at strides 8, 16 and 32 (four-stage variants only).
struct PyramidFeatures {
    Tensor4 s8, s16, s32;
};
PyramidFeatures backbone_pyramid(const Model& m, const Tensor4& x);

// Collapse every multi-branch conv unit in place.
void fuse_model(Model& m);

struct CountPart {
    std::string name;
    long long params = 0;
    long long macs = 0;
};

// Learnable parameter and conv/matmul multiply-accumulate totals for the
// model as currently constituted (training or deploy form). flops counts
// each multiply-accumulate as two operations.
struct CountReport {
    long long params = 0;
    long long macs = 0;
    long long flops = 0;
    std::vector<CountPart> parts;
};
CountReport count_model(const Model& m, int input_h = 224, int input_w = 224);

// Counts for one depthwise site in its current form.
long long dw_site_param_count(const DwSite& site);
long long dw_site_mac_count(const DwSite& site, long long oh, long long ow);

// Mutable views of every learnable tensor and norm statistic, in a fixed
// order, for serialization.
struct TensorRef {
    std::string name;
    std::vector<float>* data = nullptr;
    std::vector<int> extents;
};
std::vector<TensorRef> model_tensors(Model& m);

// Appends one depthwise site's tensors under the given name prefix.
void append_site_tensors(std::vector<TensorRef>& out, const std::string& name, DwSite& site);

} // namespace ravit
