#include "ravit/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "init_common.hpp"
#include "ravit/kernels.hpp"
#include "ravit/ops.hpp"

namespace ravit {

static ConvFull random_conv3(int cin, int cout, Rng& rng) {
    ConvFull c;
    c.kh = 3;
    c.kw = 3;
    c.cin = cin;
    c.cout = cout;
    c.stride = 1;
    c.weight = random_mat(9 * cin, cout, rng);
    c.bias = random_vec(cout, rng);
    return c;
}

Detector build_detector(const VariantConfig& cfg, uint64_t seed, int num_classes) {
    if (cfg.stages.size() != 4)
        throw std::invalid_argument("build_detector: needs a four-stage backbone");
    if (num_classes <= 0)
        throw std::invalid_argument("build_detector: num_classes must be positive");

    Detector det;
    det.seed = seed;
    det.backbone = build_model(cfg, seed, num_classes, false);

    // Separate stream so the backbone weights match a plain classifier
    // build with the same seed.
    Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
    const int wf = det.fpn.width;
    for (int l = 0; l < 3; ++l) {
        FpnLevelParams& lv = det.fpn.levels[l];
        lv.lateral_w = random_mat(wf, cfg.stages[l + 1].width, rng);
        lv.lateral_b = random_vec(wf, rng);
        lv.smooth_dw = random_dw_site(7, wf, 1, rng);
        lv.smooth_pw = random_mat(wf, wf, rng);
        lv.smooth_pw_b = random_vec(wf, rng);
    }

    DetHeadParams& hd = det.head;
    hd.width = wf;
    hd.num_classes = num_classes;
    for (int i = 0; i < 4; ++i)
        hd.cls_tower.push_back(random_conv3(wf, wf, rng));
    for (int i = 0; i < 4; ++i)
        hd.box_tower.push_back(random_conv3(wf, wf, rng));
    hd.cls_out = random_conv3(wf, num_classes, rng);
    hd.box_out = random_conv3(wf, 4, rng);
    hd.ctr_out = random_conv3(wf, 1, rng);
    hd.scales = {1.f, 1.f, 1.f};
    return det;
}

void fuse_detector(Detector& det) {
    if (det.fused)
        throw std::runtime_error("fuse_detector: detector is already fused");
    fuse_model(det.backbone);
    for (FpnLevelParams& lv : det.fpn.levels)
        lv.smooth_dw.fuse();
    det.fused = true;
}

std::array<Tensor4, 3> repfpn_forward(const PyramidFeatures& feats, const RepFpnParams& fpn) {
    const Tensor4* in[3] = {&feats.s8, &feats.s16, &feats.s32};
    std::array<Tensor4, 3> merged;
    for (int l = 2; l >= 0; --l) {
        Tensor4 lat = conv_pw(*in[l], fpn.levels[l].lateral_w, fpn.levels[l].lateral_b);
        if (l == 2) {
            merged[l] = std::move(lat);
        } else {
            merged[l] = upsample_nearest2x(merged[l + 1]);
            add_inplace(merged[l], lat);
        }
    }
    std::array<Tensor4, 3> out;
    for (int l = 0; l < 3; ++l) {
        Tensor4 s = dw_site_forward(merged[l], fpn.levels[l].smooth_dw);
        out[l] = conv_pw(s, fpn.levels[l].smooth_pw, fpn.levels[l].smooth_pw_b);
    }
    return out;
}

static Tensor4 tower_forward(const Tensor4& x, const std::vector<ConvFull>& tower) {
    Tensor4 y = x;
    for (const ConvFull& conv : tower) {
        y = conv_full_forward(y, conv, same_pad(conv.kh, conv.kw));
        gelu_inplace(y);
    }
    return y;
}

std::array<RawLevel, 3> det_head_forward(const std::array<Tensor4, 3>& feats,
                                         const DetHeadParams& head) {
    if (head.scales.size() != 3)
        throw std::invalid_argument("det_head_forward: needs one scale per level");
    std::array<RawLevel, 3> out;
    for (int l = 0; l < 3; ++l) {
        RawLevel& r = out[l];
        r.stride = 8 << l;
        r.scale = head.scales[static_cast<size_t>(l)];
        Tensor4 ct = tower_forward(feats[static_cast<size_t>(l)], head.cls_tower);
        r.cls = conv_full_forward(ct, head.cls_out, same_pad(3, 3));
        Tensor4 bt = tower_forward(feats[static_cast<size_t>(l)], head.box_tower);
        r.box = conv_full_forward(bt, head.box_out, same_pad(3, 3));
        r.ctr = conv_full_forward(bt, head.ctr_out, same_pad(3, 3));
    }
    return out;
}

int assign_level(float max_distance) {
    if (max_distance <= 0.f)
        return -1;
    if (max_distance <= 128.f)
        return 0;
    if (max_distance <= 256.f)
        return 1;
    if (max_distance <= 512.f)
        return 2;
    return -1;
}

float centerness(float l, float t, float r, float b) {
    if (l <= 0.f || t <= 0.f || r <= 0.f || b <= 0.f)
        return 0.f;
    const float wr = std::min(l, r) / std::max(l, r);
    const float hr = std::min(t, b) / std::max(t, b);
    return std::sqrt(wr * hr);
}

float sigmoid_apx(float x) {
    return 1.f / (1.f + kernels::exp_apx(-x));
}

std::vector<Detection> decode_level(const RawLevel& level, int orig_w, int orig_h,
                                    float score_thresh, int top_k) {
    const Tensor4& cls = level.cls;
    const Tensor4& box = level.box;
    const Tensor4& ctr = level.ctr;
    if (cls.n != 1 || box.n != 1 || ctr.n != 1)
        throw std::invalid_argument("decode_level: expected a single image");
    if (box.c != 4 || ctr.c != 1 || box.h != cls.h || box.w != cls.w ||
        ctr.h != cls.h || ctr.w != cls.w)
        throw std::invalid_argument("decode_level: mismatched head maps");
    if (top_k <= 0)
        throw std::invalid_argument("decode_level: top_k must be positive");

    const float fw = static_cast<float>(orig_w);
    const float fh = static_cast<float>(orig_h);
    const float half = 0.5f * static_cast<float>(level.stride);
    std::vector<Detection> out;
    for (int y = 0; y < cls.h; ++y) {
        for (int x = 0; x < cls.w; ++x) {
            const float obj = sigmoid_apx(ctr.at(0, y, x, 0));
            const float cx = static_cast<float>(x * level.stride) + half;
            const float cy = static_cast<float>(y * level.stride) + half;
            const float dl = kernels::exp_apx(level.scale * box.at(0, y, x, 0));
            const float dt = kernels::exp_apx(level.scale * box.at(0, y, x, 1));
            const float dr = kernels::exp_apx(level.scale * box.at(0, y, x, 2));
            const float db = kernels::exp_apx(level.scale * box.at(0, y, x, 3));
            for (int c = 0; c < cls.c; ++c) {
                const float score = sigmoid_apx(cls.at(0, y, x, c)) * obj;
                if (score <= score_thresh)
                    continue;
                Detection d;
                d.cls = c;
                d.score = score;
                d.x1 = std::clamp(cx - dl, 0.f, fw);
                d.y1 = std::clamp(cy - dt, 0.f, fh);
                d.x2 = std::clamp(cx + dr, 0.f, fw);
                d.y2 = std::clamp(cy + db, 0.f, fh);
                out.push_back(d);
            }
        }
    }
    if (static_cast<int>(out.size()) > top_k) {
        std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
            return a.score > b.score;
        });
        out.resize(static_cast<size_t>(top_k));
    }
    return out;
}

float box_iou(const Detection& a, const Detection& b) {
    const float iw = std::max(0.f, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const float ih = std::max(0.f, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const float inter = iw * ih;
    const float area_a = std::max(0.f, a.x2 - a.x1) * std::max(0.f, a.y2 - a.y1);
    const float area_b = std::max(0.f, b.x2 - b.x1) * std::max(0.f, b.y2 - b.y1);
    const float uni = area_a + area_b - inter;
    return uni > 0.f ? inter / uni : 0.f;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, float iou_thresh, int max_out) {
    if (max_out <= 0)
        throw std::invalid_argument("nms: max_out must be positive");
    std::vector<size_t> order(dets.size());
    for (size_t i = 0; i < dets.size(); ++i)
        order[i] = i;
    // Stable, so equal scores keep their input order.
    std::stable_sort(order.begin(), order.end(), [&dets](size_t a, size_t b) {
        return dets[a].score > dets[b].score;
    });
    std::vector<Detection> kept;
    for (size_t idx : order) {
        const Detection& d = dets[idx];
        bool drop = false;
        for (const Detection& k : kept) {
            if (k.cls == d.cls && box_iou(k, d) > iou_thresh) {
                drop = true;
                break;
            }
        }
        if (drop)
            continue;
        kept.push_back(d);
        if (static_cast<int>(kept.size()) == max_out)
            break;
    }
    return kept;
}

std::vector<Detection> detect(const Detector& det, const Tensor4& image,
                              const DetectOptions& opt) {
    if (image.n != 1 || image.c != 3)
        throw std::invalid_argument("detect: expected one image with three channels");
    const int ph = (image.h + 31) / 32 * 32;
    const int pw = (image.w + 31) / 32 * 32;
    const Tensor4* input = &image;
    Tensor4 padded;
    if (ph != image.h || pw != image.w) {
        padded = Tensor4(1, ph, pw, 3);
        for (int y = 0; y < image.h; ++y)
            std::memcpy(padded.data.data() + padded.index(0, y, 0, 0),
                        image.data.data() + image.index(0, y, 0, 0),
                        static_cast<size_t>(image.w) * 3 * sizeof(float));
        input = &padded;
    }
    PyramidFeatures feats = backbone_pyramid(det.backbone, *input);
    std::array<Tensor4, 3> maps = repfpn_forward(feats, det.fpn);
    std::array<RawLevel, 3> raw = det_head_forward(maps, det.head);
    std::vector<Detection> cands;
    for (const RawLevel& r : raw) {
        std::vector<Detection> c =
            decode_level(r, image.w, image.h, opt.score_thresh, opt.top_k_per_level);
        cands.insert(cands.end(), c.begin(), c.end());
    }
    return nms(cands, opt.iou_thresh, opt.max_detections);
}

CountReport count_detector(const Detector& det, int input_h, int input_w) {
    const int ph = (input_h + 31) / 32 * 32;
    const int pw = (input_w + 31) / 32 * 32;
    CountReport r;
    auto push = [&r](const std::string& name, long long p, long long mac) {
        r.parts.push_back(CountPart{name, p, mac});
        r.params += p;
        r.macs += mac;
    };

    CountReport back = count_model(det.backbone, ph, pw);
    push("backbone", back.params, back.macs);

    long long p = 0, mac = 0;
    for (int l = 0; l < 3; ++l) {
        const FpnLevelParams& lv = det.fpn.levels[static_cast<size_t>(l)];
        const long long lh = ph >> (3 + l), lw = pw >> (3 + l);
        p += static_cast<long long>(lv.lateral_w.data.size() + lv.lateral_b.size() +
                                    lv.smooth_pw.data.size() + lv.smooth_pw_b.size()) +
             dw_site_param_count(lv.smooth_dw);
        mac += lh * lw *
                   (static_cast<long long>(lv.lateral_w.rows) * lv.lateral_w.cols +
                    static_cast<long long>(lv.smooth_pw.rows) * lv.smooth_pw.cols) +
               dw_site_mac_count(lv.smooth_dw, lh, lw);
    }
    push("neck", p, mac);

    auto conv_params = [](const ConvFull& c) {
        return static_cast<long long>(c.weight.data.size() + c.bias.size());
    };
    auto conv_pixel_macs = [](const ConvFull& c) {
        return static_cast<long long>(c.weight.rows) * c.weight.cols;
    };
    p = 0;
    mac = 0;
    long long per_pixel = 0;
    for (const ConvFull& c : det.head.cls_tower) {
        p += conv_params(c);
        per_pixel += conv_pixel_macs(c);
    }
    for (const ConvFull& c : det.head.box_tower) {
        p += conv_params(c);
        per_pixel += conv_pixel_macs(c);
    }
    p += conv_params(det.head.cls_out) + conv_params(det.head.box_out) +
         conv_params(det.head.ctr_out) + static_cast<long long>(det.head.scales.size());
    per_pixel += conv_pixel_macs(det.head.cls_out) + conv_pixel_macs(det.head.box_out) +
                 conv_pixel_macs(det.head.ctr_out);
    for (int l = 0; l < 3; ++l)
        mac += static_cast<long long>(ph >> (3 + l)) * (pw >> (3 + l)) * per_pixel;
    push("head", p, mac);

    r.flops = 2 * r.macs;
    return r;
}

static void add_mat_ref(std::vector<TensorRef>& out, const std::string& name, Mat& m) {
    out.push_back(TensorRef{name, &m.data, {m.rows, m.cols}});
}

static void add_vec_ref(std::vector<TensorRef>& out, const std::string& name,
                        std::vector<float>& v) {
    if (!v.empty())
        out.push_back(TensorRef{name, &v, {static_cast<int>(v.size())}});
}

static void add_conv_ref(std::vector<TensorRef>& out, const std::string& name, ConvFull& c) {
    add_mat_ref(out, name + ".weight", c.weight);
    add_vec_ref(out, name + ".bias", c.bias);
}

std::vector<TensorRef> detector_tensors(Detector& det) {
    std::vector<TensorRef> out = model_tensors(det.backbone);
    for (TensorRef& ref : out)
        ref.name = "backbone." + ref.name;
    for (int l = 0; l < 3; ++l) {
        FpnLevelParams& lv = det.fpn.levels[static_cast<size_t>(l)];
        const std::string base = "fpn" + std::to_string(l);
        add_mat_ref(out, base + ".lateral", lv.lateral_w);
        add_vec_ref(out, base + ".lateral_b", lv.lateral_b);
        append_site_tensors(out, base + ".dw", lv.smooth_dw);
        add_mat_ref(out, base + ".pw", lv.smooth_pw);
        add_vec_ref(out, base + ".pw_b", lv.smooth_pw_b);
    }
    for (size_t i = 0; i < det.head.cls_tower.size(); ++i)
        add_conv_ref(out, "head.cls_tower" + std::to_string(i), det.head.cls_tower[i]);
    for (size_t i = 0; i < det.head.box_tower.size(); ++i)
        add_conv_ref(out, "head.box_tower" + std::to_string(i), det.head.box_tower[i]);
    add_conv_ref(out, "head.cls", det.head.cls_out);
    add_conv_ref(out, "head.box", det.head.box_out);
    add_conv_ref(out, "head.ctr", det.head.ctr_out);
    add_vec_ref(out, "head.scales", det.head.scales);
    return out;
}

} // namespace ravit
