#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include "doctest.h"
#include "ravit/backbone.hpp"
#include "ravit/rng.hpp"

using namespace ravit;

namespace {

Tensor4 random_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Tensor4 x(1, h, w, 3);
    for (float& v : x.data)
        v = rng.normal(0.f, 1.f);
    return x;
}

} // namespace

TEST_CASE("variant presets expose the published shapes") {
    VariantConfig t26 = variant_config("t26");
    REQUIRE(t26.stages.size() == 4);
    CHECK(t26.stem_widths == std::vector<int>{20, 40});
    CHECK(t26.stages[0].width == 40);
    CHECK(t26.stages[1].width == 80);
    CHECK(t26.stages[2].width == 120);
    CHECK(t26.stages[3].width == 320);
    CHECK(t26.stages[0].depth == 2);
    CHECK(t26.stages[1].depth == 4);
    CHECK(t26.stages[2].depth == 16);
    CHECK(t26.stages[3].depth == 4);
    CHECK(t26.stages[2].kernel == 7);
    CHECK(t26.stages[2].mixer == MixerKind::RepMSDW);
    CHECK(t26.stages[3].mixer == MixerKind::RepSA);

    VariantConfig s22 = variant_config("s22");
    CHECK(s22.stages[0].width == 48);
    CHECK(s22.stages[1].width == 96);
    CHECK(s22.stages[2].width == 192);
    CHECK(s22.stages[3].width == 384);
    CHECK(s22.stages[2].depth == 12);

    VariantConfig s26 = variant_config("s26");
    CHECK(s26.stages[2].depth == 16);
    CHECK(s26.stages[3].width == 384);

    VariantConfig m26 = variant_config("m26");
    CHECK(m26.stem_widths == std::vector<int>{32, 64});
    CHECK(m26.stages[0].width == 64);
    CHECK(m26.stages[3].width == 512);

    VariantConfig v1 = variant_config("v1");
    CHECK(v1.stem_widths.size() == 4);
    CHECK(v1.stages.size() == 3);
    for (const StageConfig& s : v1.stages) {
        CHECK(s.mixer == MixerKind::RepMSDW);
        CHECK(s.kernel == 3);
    }

    VariantConfig v3 = variant_config("v3");
    CHECK(v3.stages[2].mixer == MixerKind::RepMSDW);
    CHECK(v3.stages[2].kernel == 7);
    CHECK(v3.stages[3].mixer == MixerKind::RepMSDW);

    VariantConfig v4 = variant_config("v4");
    CHECK(v4.name == "v4");
    CHECK(v4.stages[3].mixer == MixerKind::RepSA);

    VariantConfig v5 = variant_config("v5");
    CHECK(v5.stages[2].mixer == MixerKind::RepSA);

    CHECK_THROWS_AS(variant_config("s99"), std::invalid_argument);
    CHECK(variant_names().size() == 9);
}

TEST_CASE("attention value width is 21.5 percent of the channel width, floored") {
    CHECK(attention_value_dim(192) == 41);
    CHECK(attention_value_dim(320) == 68);
    CHECK(attention_value_dim(384) == 82);
    CHECK(attention_value_dim(512) == 110);
}

TEST_CASE("parameter totals for the published variants") {
    // totals hand-derived from the layer shapes; learnables only
    auto count = [](const char* name) {
        Model m = build_model(variant_config(name), 7);
        return count_model(m).params;
    };
    CHECK(count("t26") == 7394140LL);
    CHECK(count("s22") == 10699292LL);
    CHECK(count("s26") == 11640284LL);
    CHECK(count("m26") == 19289816LL);
}

TEST_CASE("count walk matches a tiny hand-computed config") {
    VariantConfig cfg;
    cfg.name = "tiny";
    cfg.stem_widths = {4, 8};
    StageConfig st;
    st.width = 8;
    st.depth = 1;
    st.mixer = MixerKind::RepMSDW;
    st.kernel = 3;
    cfg.stages = {st};
    Model m = build_model(cfg, 1, 1000, false);

    // stem: 9*3*4 + 2*4 = 116, then 9*4*8 + 2*8 = 304
    // block: main 3*3*8 = 72, branches on 2 channels: 1 + 3*2 + 3*3*2*2 -> 2+12+36
    //        = 50, bn 16 -> 138; ffn 8*24+24 + 24*8+8 = 416, norm 16 -> 570
    CountReport r = count_model(m, 8, 8);
    CHECK(r.params == 116 + 304 + 570);

    // input 8x8: stem maps at 4x4 then 2x2; block hw = 4
    // stem macs: 16*108 + 4*288 = 2880
    // dw: 4*(9*8) + 4*(1*2 + 2*3*2 + 6*3*2) = 288 + 200 = 488
    // ffn: 4*(8*24 + 24*8) = 1536
    CHECK(r.macs == 2880 + 488 + 1536);
    CHECK(r.flops == 2 * r.macs);
    REQUIRE(r.parts.size() == 2);
    CHECK(r.parts[0].name == "stem");
    CHECK(r.parts[0].params == 420);
    CHECK(r.parts[1].params == 570);
}

TEST_CASE("multiply-accumulate totals for the published variants at 224") {
    Model s26 = build_model(variant_config("s26"), 7);
    fuse_model(s26);
    CountReport r = count_model(s26, 224, 224);
    CHECK(r.macs == 1396893640LL);
    CHECK(r.flops == 2793787280LL);

    Model m26 = build_model(variant_config("m26"), 7);
    fuse_model(m26);
    CHECK(count_model(m26, 224, 224).macs == 2458545656LL);
}

TEST_CASE("stage outputs follow the four-level stride contract") {
    Model m = build_model(variant_config("s22"), 3);
    Tensor4 x = random_image(224, 224, 99);
    std::vector<Tensor4> stage_outs;
    Tensor4 last = backbone_forward(m, x, &stage_outs);
    REQUIRE(stage_outs.size() == 4);
    const int hs[] = {56, 28, 14, 7};
    const int cs[] = {48, 96, 192, 384};
    for (int i = 0; i < 4; ++i) {
        CHECK(stage_outs[i].h == hs[i]);
        CHECK(stage_outs[i].w == hs[i]);
        CHECK(stage_outs[i].c == cs[i]);
    }
    CHECK(last.same_shape(stage_outs[3]));

    Mat logits = backbone_logits(m, x);
    CHECK(logits.rows == 1);
    CHECK(logits.cols == 1000);
    for (float v : logits.data)
        REQUIRE(std::isfinite(v));
}

TEST_CASE("pyramid features come from the last three stages") {
    Model m = build_model(variant_config("s22"), 5, 1000, false);
    Tensor4 x = random_image(64, 96, 44);
    PyramidFeatures p = backbone_pyramid(m, x);
    CHECK(p.s8.h == 8);
    CHECK(p.s8.w == 12);
    CHECK(p.s8.c == 96);
    CHECK(p.s16.h == 4);
    CHECK(p.s16.w == 6);
    CHECK(p.s16.c == 192);
    CHECK(p.s32.h == 2);
    CHECK(p.s32.w == 3);
    CHECK(p.s32.c == 384);

    Model three = build_model(variant_config("v1"), 5, 1000, false);
    CHECK_THROWS_AS(backbone_pyramid(three, x), std::runtime_error);
}

TEST_CASE("fusing a model keeps its outputs within float tolerance") {
    Model m = build_model(variant_config("s22"), 11);
    Tensor4 x = random_image(96, 96, 7);
    Mat before = backbone_logits(m, x);

    Model fused = m;
    fuse_model(fused);
    CHECK(fused.fused);
    CHECK_THROWS_AS(fuse_model(fused), std::runtime_error);
    Mat after = backbone_logits(fused, x);

    REQUIRE(before.data.size() == after.data.size());
    double worst = 0.0;
    for (size_t i = 0; i < before.data.size(); ++i)
        worst = std::max(worst, std::fabs(static_cast<double>(before.data[i]) -
                                          after.data[i]));
    CHECK_MESSAGE(worst <= 5e-4, "worst logit gap ", worst);

    CHECK(count_model(fused).params < count_model(m).params);
}

TEST_CASE("model construction is bitwise deterministic in the seed") {
    Model a = build_model(variant_config("t26"), 42);
    Model b = build_model(variant_config("t26"), 42);
    Model c = build_model(variant_config("t26"), 43);

    auto ta = model_tensors(a);
    auto tb = model_tensors(b);
    auto tc = model_tensors(c);
    REQUIRE(ta.size() == tb.size());
    REQUIRE(ta.size() == tc.size());
    bool any_differs = false;
    for (size_t i = 0; i < ta.size(); ++i) {
        REQUIRE(ta[i].name == tb[i].name);
        REQUIRE(ta[i].data->size() == tb[i].data->size());
        REQUIRE(std::memcmp(ta[i].data->data(), tb[i].data->data(),
                            ta[i].data->size() * sizeof(float)) == 0);
        if (std::memcmp(ta[i].data->data(), tc[i].data->data(),
                        ta[i].data->size() * sizeof(float)) != 0)
            any_differs = true;
    }
    CHECK(any_differs);
}

TEST_CASE("tensor walk names are unique and extents match payloads") {
    Model m = build_model(variant_config("s22"), 9);
    auto refs = model_tensors(m);
    REQUIRE(!refs.empty());
    std::set<std::string> names;
    for (const TensorRef& r : refs) {
        CHECK(names.insert(r.name).second);
        size_t expect = 1;
        for (int e : r.extents)
            expect *= static_cast<size_t>(e);
        CHECK(expect == r.data->size());
    }

    // training form exposes the branch kernels, deploy form the single conv
    bool has_branch = false;
    for (const TensorRef& r : refs)
        if (r.name.find(".dw.branch1") != std::string::npos)
            has_branch = true;
    CHECK(has_branch);

    fuse_model(m);
    auto fused_refs = model_tensors(m);
    CHECK(fused_refs.size() < refs.size());
    for (const TensorRef& r : fused_refs) {
        CHECK(r.name.find(".dw.branch1") == std::string::npos);
        CHECK(r.name.find(".dw.main") == std::string::npos);
    }
}

TEST_CASE("build_model rejects inconsistent configurations") {
    VariantConfig cfg = variant_config("s22");
    CHECK_THROWS_AS(build_model(cfg, 1, 0), std::invalid_argument);
    cfg.stem_widths.back() = 40;
    CHECK_THROWS_AS(build_model(cfg, 1), std::invalid_argument);
    VariantConfig empty;
    CHECK_THROWS_AS(build_model(empty, 1), std::invalid_argument);
}
