#include "ravit/backbone.hpp"

#include <stdexcept>

#include "init_common.hpp"
#include "ravit/ops.hpp"
#include "ravit/rng.hpp"

namespace ravit {

static StageConfig stage(int width, int depth, MixerKind mixer, int kernel) {
    StageConfig s;
    s.width = width;
    s.depth = depth;
    s.mixer = mixer;
    s.kernel = kernel;
    return s;
}

std::vector<std::string> variant_names() {
    return {"t26", "s22", "s26", "m26", "v1", "v2", "v3", "v4", "v5"};
}

VariantConfig variant_config(const std::string& name) {
    const MixerKind M = MixerKind::RepMSDW;
    const MixerKind A = MixerKind::RepSA;
    VariantConfig v;
    v.name = name;
    if (name == "t26") {
        v.stem_widths = {20, 40};
        v.stages = {stage(40, 2, M, 3), stage(80, 4, M, 3),
                    stage(120, 16, M, 7), stage(320, 4, A, 7)};
    } else if (name == "s22") {
        v.stem_widths = {24, 48};
        v.stages = {stage(48, 2, M, 3), stage(96, 4, M, 3),
                    stage(192, 12, M, 7), stage(384, 4, A, 7)};
    } else if (name == "s26") {
        v.stem_widths = {24, 48};
        v.stages = {stage(48, 2, M, 3), stage(96, 4, M, 3),
                    stage(192, 16, M, 7), stage(384, 4, A, 7)};
    } else if (name == "m26") {
        v.stem_widths = {32, 64};
        v.stages = {stage(64, 2, M, 3), stage(128, 4, M, 3),
                    stage(256, 16, M, 7), stage(512, 4, A, 7)};
    } else if (name == "v1") {
        // conv-only baseline: deeper stem ladder, three stages
        v.stem_widths = {12, 24, 48, 96};
        v.stages = {stage(96, 4, M, 3), stage(192, 16, M, 3), stage(384, 4, M, 3)};
    } else if (name == "v2") {
        v.stem_widths = {24, 48};
        v.stages = {stage(48, 2, M, 3), stage(96, 4, M, 3),
                    stage(192, 12, M, 3), stage(384, 4, M, 3)};
    } else if (name == "v3") {
        v.stem_widths = {24, 48};
        v.stages = {stage(48, 2, M, 3), stage(96, 4, M, 3),
                    stage(192, 12, M, 7), stage(384, 4, M, 7)};
    } else if (name == "v4") {
        v = variant_config("s22");
        v.name = name;
    } else if (name == "v5") {
        v.stem_widths = {24, 48};
        v.stages = {stage(48, 2, M, 3), stage(96, 4, M, 3),
                    stage(192, 12, A, 7), stage(384, 4, A, 7)};
    } else {
        throw std::invalid_argument("variant_config: unknown variant '" + name +
                                    "' (expected t26, s22, s26, m26 or v1..v5)");
    }
    return v;
}

static constexpr float kResidualGain = 0.1f;

static FfnParams random_ffn(int channels, Rng& rng) {
    FfnParams f;
    f.w_expand = random_mat(channels, 3 * channels, rng);
    f.b_expand = random_vec(3 * channels, rng);
    f.w_reduce = random_mat(3 * channels, channels, rng);
    f.b_reduce = random_vec(channels, rng);
    return f;
}

Model build_model(const VariantConfig& cfg, uint64_t seed, int num_classes, bool with_head) {
    if (cfg.stages.empty())
        throw std::invalid_argument("build_model: config has no stages");
    if (cfg.stem_widths.empty() || cfg.stem_widths.back() != cfg.stages[0].width)
        throw std::invalid_argument("build_model: stem must end at the first stage width");
    if (with_head && num_classes <= 0)
        throw std::invalid_argument("build_model: num_classes must be positive");

    Model m;
    m.cfg = cfg;
    m.seed = seed;
    m.num_classes = num_classes;
    m.has_head = with_head;

    Rng rng(seed);
    int cin = 3;
    for (int width : cfg.stem_widths) {
        StemLayer layer;
        layer.conv.kh = 3;
        layer.conv.kw = 3;
        layer.conv.cin = cin;
        layer.conv.cout = width;
        layer.conv.stride = 2;
        layer.conv.weight = random_mat(9 * cin, width, rng);
        layer.bn = BnParams(width);
        init_bn(layer.bn, rng);
        m.stem.push_back(std::move(layer));
        cin = width;
    }
    for (size_t si = 0; si < cfg.stages.size(); ++si) {
        const StageConfig& sc = cfg.stages[si];
        std::vector<BlockParams> blocks;
        for (int d = 0; d < sc.depth; ++d) {
            BlockParams b;
            b.mixer = sc.mixer;
            b.dw = random_dw_site(sc.kernel, sc.width, 1, rng);
            if (sc.mixer == MixerKind::RepSA) {
                const int dv = attention_value_dim(sc.width);
                b.sa.dv = dv;
                b.sa.wq = random_mat(sc.width, b.sa.dq, rng);
                b.sa.wk = random_mat(sc.width, b.sa.dk, rng);
                b.sa.wv = random_mat(sc.width, dv, rng);
                b.sa.wo = random_mat(sc.width + dv, sc.width, rng);
                b.sa_norm = BnParams(sc.width);
                init_bn(b.sa_norm, rng);
                damp_bn(b.sa_norm, kResidualGain);
            } else {
                // the unit's trailing BN is this mixer's residual norm
                damp_bn(b.dw.set.bn, kResidualGain);
            }
            b.ffn = random_ffn(sc.width, rng);
            b.ffn_norm = BnParams(sc.width);
            init_bn(b.ffn_norm, rng);
            damp_bn(b.ffn_norm, kResidualGain);
            blocks.push_back(std::move(b));
        }
        m.stages.push_back(std::move(blocks));
        if (si + 1 < cfg.stages.size()) {
            const int cout = cfg.stages[si + 1].width;
            DownsampleParams ds;
            ds.dw = random_dw_site(7, sc.width, 2, rng);
            ds.pw = random_mat(cout, sc.width, rng);
            ds.bn = BnParams(cout);
            init_bn(ds.bn, rng);
            ds.ffn = random_ffn(cout, rng);
            ds.ffn_norm = BnParams(cout);
            init_bn(ds.ffn_norm, rng);
            damp_bn(ds.ffn_norm, kResidualGain);
            m.downsamples.push_back(std::move(ds));
        }
    }
    if (with_head) {
        const int cl = cfg.stages.back().width;
        m.head.fc1 = random_mat(cl, cfg.head_hidden, rng);
        m.head.b1 = random_vec(cfg.head_hidden, rng);
        m.head.fc2 = random_mat(cfg.head_hidden, num_classes, rng);
        m.head.b2 = random_vec(num_classes, rng);
    }
    return m;
}

Tensor4 backbone_forward(const Model& m, const Tensor4& x, std::vector<Tensor4>* stage_outs) {
    Tensor4 y = stem_forward(x, m.stem);
    for (size_t si = 0; si < m.stages.size(); ++si) {
        for (const BlockParams& b : m.stages[si])
            y = ravit_block(y, b);
        if (stage_outs)
            stage_outs->push_back(y);
        if (si < m.downsamples.size())
            y = downsample_forward(y, m.downsamples[si]);
    }
    return y;
}

Mat backbone_logits(const Model& m, const Tensor4& x) {
    if (!m.has_head)
        throw std::runtime_error("backbone_logits: model has no classifier head");
    return classifier_forward(backbone_forward(m, x), m.head);
}

PyramidFeatures backbone_pyramid(const Model& m, const Tensor4& x) {
    if (m.stages.size() != 4)
        throw std::runtime_error("backbone_pyramid: needs a four-stage model");
    std::vector<Tensor4> outs;
    backbone_forward(m, x, &outs);
    PyramidFeatures p;
    p.s8 = std::move(outs[1]);
    p.s16 = std::move(outs[2]);
    p.s32 = std::move(outs[3]);
    return p;
}

void fuse_model(Model& m) {
    if (m.fused)
        throw std::runtime_error("fuse_model: model is already fused");
    for (auto& blocks : m.stages)
        for (BlockParams& b : blocks)
            b.dw.fuse();
    for (DownsampleParams& ds : m.downsamples)
        ds.dw.fuse();
    m.fused = true;
}

static long long bn_params(const BnParams& bn) {
    // gamma and beta are learnable; running stats are not
    return 2LL * bn.channels();
}

long long dw_site_param_count(const DwSite& site) {
    if (site.fused)
        return static_cast<long long>(site.conv.kernels.data.size()) +
               static_cast<long long>(site.conv.bias.size());
    const DwKernelSet& s = site.set;
    return static_cast<long long>(s.main.data.size() + s.branch1.data.size() +
                                  s.branch2a.data.size() + s.branch2b.data.size() +
                                  s.branch3a.data.size() + s.branch3b.data.size()) +
           bn_params(s.bn);
}

long long dw_site_mac_count(const DwSite& site, long long oh, long long ow) {
    if (site.fused)
        return oh * ow * static_cast<long long>(site.conv.k) * site.conv.k * site.conv.channels;
    const DwKernelSet& s = site.set;
    const long long q = s.channels / 4;
    long long macs = oh * ow * static_cast<long long>(s.k) * s.k * s.channels;
    macs += oh * ow * (static_cast<long long>(s.s) * s.s * q + 2LL * s.k * q + 6LL * s.k * q);
    return macs;
}

static long long ffn_params(const FfnParams& f) {
    return static_cast<long long>(f.w_expand.data.size() + f.b_expand.size() +
                                  f.w_reduce.data.size() + f.b_reduce.size());
}

static long long ffn_macs(const FfnParams& f, long long pixels) {
    return pixels * (static_cast<long long>(f.w_expand.rows) * f.w_expand.cols +
                     static_cast<long long>(f.w_reduce.rows) * f.w_reduce.cols);
}

static long long sa_params(const SaParams& sa) {
    return static_cast<long long>(sa.wq.data.size() + sa.wk.data.size() +
                                  sa.wv.data.size() + sa.wo.data.size());
}

static long long sa_macs(const SaParams& sa, long long hw) {
    const long long c = sa.wq.rows;
    long long macs = hw * c * (sa.wq.cols + sa.wk.cols + sa.wv.cols);
    macs += hw * hw * (sa.wq.cols + sa.wv.cols); // scores and weighted sum
    macs += hw * static_cast<long long>(sa.wo.rows) * sa.wo.cols;
    return macs;
}

CountReport count_model(const Model& m, int input_h, int input_w) {
    CountReport r;
    auto push = [&r](const std::string& name, long long p, long long mac) {
        r.parts.push_back(CountPart{name, p, mac});
        r.params += p;
        r.macs += mac;
    };

    int h = input_h, w = input_w;
    long long p = 0, mac = 0;
    for (const StemLayer& layer : m.stem) {
        h = conv_out_extent(h, layer.conv.kh, (layer.conv.kh - 1) / 2, layer.conv.kh / 2,
                            layer.conv.stride);
        w = conv_out_extent(w, layer.conv.kw, (layer.conv.kw - 1) / 2, layer.conv.kw / 2,
                            layer.conv.stride);
        p += static_cast<long long>(layer.conv.weight.data.size()) +
             static_cast<long long>(layer.conv.bias.size()) + bn_params(layer.bn);
        mac += static_cast<long long>(h) * w * layer.conv.weight.rows * layer.conv.weight.cols;
    }
    push("stem", p, mac);

    for (size_t si = 0; si < m.stages.size(); ++si) {
        p = 0;
        mac = 0;
        const long long hw = static_cast<long long>(h) * w;
        for (const BlockParams& b : m.stages[si]) {
            p += dw_site_param_count(b.dw) + ffn_params(b.ffn) + bn_params(b.ffn_norm);
            mac += dw_site_mac_count(b.dw, h, w) + ffn_macs(b.ffn, hw);
            if (b.mixer == MixerKind::RepSA) {
                p += sa_params(b.sa) + bn_params(b.sa_norm);
                mac += sa_macs(b.sa, hw);
            }
        }
        push("stage" + std::to_string(si + 1), p, mac);
        if (si < m.downsamples.size()) {
            const DownsampleParams& ds = m.downsamples[si];
            h = conv_out_extent(h, 7, 3, 3, 2);
            w = conv_out_extent(w, 7, 3, 3, 2);
            const long long ohw = static_cast<long long>(h) * w;
            p = dw_site_param_count(ds.dw) + static_cast<long long>(ds.pw.data.size()) +
                bn_params(ds.bn) + ffn_params(ds.ffn) + bn_params(ds.ffn_norm);
            mac = dw_site_mac_count(ds.dw, h, w) +
                  ohw * static_cast<long long>(ds.pw.rows) * ds.pw.cols +
                  ffn_macs(ds.ffn, ohw);
            push("down" + std::to_string(si + 1), p, mac);
        }
    }

    if (m.has_head) {
        p = static_cast<long long>(m.head.fc1.data.size() + m.head.b1.size() +
                                   m.head.fc2.data.size() + m.head.b2.size());
        mac = static_cast<long long>(m.head.fc1.rows) * m.head.fc1.cols +
              static_cast<long long>(m.head.fc2.rows) * m.head.fc2.cols;
        push("head", p, mac);
    }
    r.flops = 2 * r.macs;
    return r;
}

static void add_mat(std::vector<TensorRef>& out, const std::string& name, Mat& m) {
    out.push_back(TensorRef{name, &m.data, {m.rows, m.cols}});
}

static void add_vec(std::vector<TensorRef>& out, const std::string& name, std::vector<float>& v) {
    if (!v.empty())
        out.push_back(TensorRef{name, &v, {static_cast<int>(v.size())}});
}

static void add_dw(std::vector<TensorRef>& out, const std::string& name, DwWeights& w) {
    out.push_back(TensorRef{name, &w.data, {w.channels, w.kh, w.kw}});
}

static void add_bn(std::vector<TensorRef>& out, const std::string& name, BnParams& bn) {
    out.push_back(TensorRef{name + ".gamma", &bn.gamma, {bn.channels()}});
    out.push_back(TensorRef{name + ".beta", &bn.beta, {bn.channels()}});
    out.push_back(TensorRef{name + ".mean", &bn.mean, {bn.channels()}});
    out.push_back(TensorRef{name + ".var", &bn.var, {bn.channels()}});
}

void append_site_tensors(std::vector<TensorRef>& out, const std::string& name, DwSite& site) {
    if (site.fused) {
        add_dw(out, name + ".kernels", site.conv.kernels);
        add_vec(out, name + ".bias", site.conv.bias);
    } else {
        add_dw(out, name + ".main", site.set.main);
        add_dw(out, name + ".branch1", site.set.branch1);
        add_dw(out, name + ".branch2a", site.set.branch2a);
        add_dw(out, name + ".branch2b", site.set.branch2b);
        add_dw(out, name + ".branch3a", site.set.branch3a);
        add_dw(out, name + ".branch3b", site.set.branch3b);
        add_bn(out, name + ".bn", site.set.bn);
    }
}

static void add_ffn(std::vector<TensorRef>& out, const std::string& name, FfnParams& f) {
    add_mat(out, name + ".w_expand", f.w_expand);
    add_vec(out, name + ".b_expand", f.b_expand);
    add_mat(out, name + ".w_reduce", f.w_reduce);
    add_vec(out, name + ".b_reduce", f.b_reduce);
}

std::vector<TensorRef> model_tensors(Model& m) {
    std::vector<TensorRef> out;
    for (size_t i = 0; i < m.stem.size(); ++i) {
        const std::string base = "stem" + std::to_string(i);
        add_mat(out, base + ".weight", m.stem[i].conv.weight);
        add_vec(out, base + ".bias", m.stem[i].conv.bias);
        add_bn(out, base + ".bn", m.stem[i].bn);
    }
    for (size_t si = 0; si < m.stages.size(); ++si) {
        for (size_t bi = 0; bi < m.stages[si].size(); ++bi) {
            BlockParams& b = m.stages[si][bi];
            const std::string base =
                "stage" + std::to_string(si + 1) + ".b" + std::to_string(bi);
            append_site_tensors(out, base + ".dw", b.dw);
            if (b.mixer == MixerKind::RepSA) {
                add_mat(out, base + ".sa.wq", b.sa.wq);
                add_mat(out, base + ".sa.wk", b.sa.wk);
                add_mat(out, base + ".sa.wv", b.sa.wv);
                add_mat(out, base + ".sa.wo", b.sa.wo);
                add_bn(out, base + ".sa_norm", b.sa_norm);
            }
            add_ffn(out, base + ".ffn", b.ffn);
            add_bn(out, base + ".ffn_norm", b.ffn_norm);
        }
        if (si < m.downsamples.size()) {
            DownsampleParams& ds = m.downsamples[si];
            const std::string base = "down" + std::to_string(si + 1);
            append_site_tensors(out, base + ".dw", ds.dw);
            add_mat(out, base + ".pw", ds.pw);
            add_bn(out, base + ".bn", ds.bn);
            add_ffn(out, base + ".ffn", ds.ffn);
            add_bn(out, base + ".ffn_norm", ds.ffn_norm);
        }
    }
    if (m.has_head) {
        add_mat(out, "head.fc1", m.head.fc1);
        add_vec(out, "head.b1", m.head.b1);
        add_mat(out, "head.fc2", m.head.fc2);
        add_vec(out, "head.b2", m.head.b2);
    }
    return out;
}

} // namespace ravit
