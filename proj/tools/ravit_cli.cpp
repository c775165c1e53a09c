#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ravit/backbone.hpp"
#include "ravit/bench.hpp"
#include "ravit/detector.hpp"
#include "ravit/image.hpp"
#include "ravit/kernels.hpp"
#include "ravit/rng.hpp"
#include "ravit/weights_io.hpp"

using namespace ravit;
using nlohmann::json;

namespace {

std::string timestamp_utc() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Tensor4 seeded_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Tensor4 x(1, h, w, 3);
    for (float& v : x.data)
        v = rng.normal(0.f, 1.f);
    return x;
}

void emit(const json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open " + out_path);
        out << j.dump(2) << "\n";
        std::cout << "wrote " << out_path << "\n";
    }
}

struct SiteRef {
    std::string name;
    const DwSite* site;
};

std::vector<SiteRef> collect_sites(const Model& m) {
    std::vector<SiteRef> out;
    for (size_t si = 0; si < m.stages.size(); ++si) {
        for (size_t bi = 0; bi < m.stages[si].size(); ++bi)
            out.push_back({"stage" + std::to_string(si + 1) + ".b" + std::to_string(bi) + ".dw",
                           &m.stages[si][bi].dw});
        if (si < m.downsamples.size())
            out.push_back({"down" + std::to_string(si + 1) + ".dw", &m.downsamples[si].dw});
    }
    return out;
}

std::vector<SiteRef> collect_sites(const Detector& det) {
    std::vector<SiteRef> out = collect_sites(det.backbone);
    for (SiteRef& r : out)
        r.name = "backbone." + r.name;
    for (size_t l = 0; l < det.fpn.levels.size(); ++l)
        out.push_back({"fpn" + std::to_string(l) + ".dw", &det.fpn.levels[l].smooth_dw});
    return out;
}

// worst per-site fusion gap; throws naming the first site over tolerance
double check_sites(const std::vector<SiteRef>& sites, int trials, double tol) {
    double worst = 0.0;
    for (const SiteRef& s : sites) {
        EquivalenceReport rep = verify_equivalence(s.site->set, trials, tol);
        worst = std::max(worst, rep.max_abs_diff);
        if (!rep.pass)
            throw std::runtime_error("conv unit " + s.name + " differs after collapse by " +
                                     std::to_string(rep.max_abs_diff) + " (tolerance " +
                                     std::to_string(tol) + ")");
    }
    return worst;
}

float worst_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    float worst = 0.f;
    for (size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::fabs(a[i] - b[i]));
    return worst;
}

std::array<RawLevel, 3> detector_maps(const Detector& det, const Tensor4& img) {
    return det_head_forward(repfpn_forward(backbone_pyramid(det.backbone, img), det.fpn),
                            det.head);
}

float detector_maps_diff(const std::array<RawLevel, 3>& a, const std::array<RawLevel, 3>& b) {
    float worst = 0.f;
    for (int l = 0; l < 3; ++l) {
        worst = std::max(worst, worst_abs_diff(a[l].cls.data, b[l].cls.data));
        worst = std::max(worst, worst_abs_diff(a[l].box.data, b[l].box.data));
        worst = std::max(worst, worst_abs_diff(a[l].ctr.data, b[l].ctr.data));
    }
    return worst;
}

int cmd_build(const std::string& variant, uint64_t seed, int classes, bool as_detector,
              const std::string& out_path) {
    const VariantConfig cfg = variant_config(variant);
    json j;
    j["command"] = "build";
    j["variant"] = variant;
    j["seed"] = seed;
    j["detector"] = as_detector;
    j["out"] = out_path;
    if (as_detector) {
        const int nc = classes > 0 ? classes : 80;
        Detector det = build_detector(cfg, seed, nc);
        save_detector(out_path, det);
        const CountReport r = count_detector(det);
        j["num_classes"] = nc;
        j["params"] = r.params;
        j["macs"] = r.macs;
        j["flops"] = r.flops;
    } else {
        const int nc = classes > 0 ? classes : 1000;
        Model m = build_model(cfg, seed, nc);
        save_model(out_path, m);
        const CountReport r = count_model(m);
        j["num_classes"] = nc;
        j["params"] = r.params;
        j["macs"] = r.macs;
        j["flops"] = r.flops;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_fuse(const std::string& in_path, const std::string& out_path, int trials, double tol,
             int check_size) {
    const WeightsMeta meta = load_meta(in_path);
    if (meta.fused)
        throw std::runtime_error("fuse: " + in_path + " is already fused");
    const auto bytes_before = std::filesystem::file_size(in_path);

    json j;
    j["command"] = "fuse";
    j["in"] = in_path;
    j["out"] = out_path;
    j["trials"] = trials;
    j["tolerance"] = tol;

    const Tensor4 img = seeded_image(check_size, check_size, 0xC0FFEEull);
    if (meta.detector) {
        Detector det = load_detector(in_path);
        const std::vector<SiteRef> sites = collect_sites(det);
        j["sites"] = sites.size();
        j["max_site_diff"] = check_sites(sites, trials, tol);
        const std::array<RawLevel, 3> before = detector_maps(det, img);
        j["params_before"] = count_detector(det).params;
        fuse_detector(det);
        j["params_after"] = count_detector(det).params;
        j["whole_model_diff"] = detector_maps_diff(before, detector_maps(det, img));
        save_detector(out_path, det);
    } else {
        Model m = load_model(in_path);
        const std::vector<SiteRef> sites = collect_sites(m);
        j["sites"] = sites.size();
        j["max_site_diff"] = check_sites(sites, trials, tol);
        const Mat before = backbone_logits(m, img);
        j["params_before"] = count_model(m).params;
        fuse_model(m);
        j["params_after"] = count_model(m).params;
        j["whole_model_diff"] = worst_abs_diff(before.data, backbone_logits(m, img).data);
        save_model(out_path, m);
    }
    const auto bytes_after = std::filesystem::file_size(out_path);
    j["bytes_before"] = bytes_before;
    j["bytes_after"] = bytes_after;
    if (bytes_after >= bytes_before)
        throw std::runtime_error("fuse: output is not smaller than the input");
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_verify(const std::string& in_path, int trials, double tol, int image_size) {
    const WeightsMeta meta = load_meta(in_path);
    Model model;
    Detector det;
    std::vector<TensorRef> refs;
    if (meta.detector) {
        det = load_detector(in_path);
        refs = detector_tensors(det);
    } else {
        model = load_model(in_path);
        refs = model_tensors(model);
    }

    for (const TensorRef& r : refs) {
        for (size_t i = 0; i < r.data->size(); ++i) {
            if (!std::isfinite((*r.data)[i])) {
                std::cout << "verify: FAIL tensor '" << r.name
                          << "' has a non-finite value at index " << i << "\n";
                return 1;
            }
        }
    }
    std::cout << "ok: all " << refs.size() << " tensors finite\n";

    if (meta.fused) {
        std::cout << "ok: stored in collapsed form, branch equivalence not applicable\n";
    } else {
        const std::vector<SiteRef> sites =
            meta.detector ? collect_sites(det) : collect_sites(model);
        double worst = 0.0;
        for (const SiteRef& s : sites) {
            const EquivalenceReport rep = verify_equivalence(s.site->set, trials, tol);
            worst = std::max(worst, rep.max_abs_diff);
            if (!rep.pass) {
                std::cout << "verify: FAIL conv unit " << s.name << " differs after collapse by "
                          << rep.max_abs_diff << " (tolerance " << tol << ")\n";
                return 1;
            }
        }
        std::cout << "ok: " << sites.size() << " conv units collapse within " << tol
                  << " (worst " << worst << ")\n";
    }

    const Tensor4 img = seeded_image(image_size, image_size, 0xC0FFEEull);
    bool finite = true;
    if (meta.detector) {
        const std::array<RawLevel, 3> maps = detector_maps(det, img);
        for (const RawLevel& lv : maps) {
            for (float v : lv.cls.data)
                finite = finite && std::isfinite(v);
            for (float v : lv.box.data)
                finite = finite && std::isfinite(v);
            for (float v : lv.ctr.data)
                finite = finite && std::isfinite(v);
        }
    } else {
        for (float v : backbone_logits(model, img).data)
            finite = finite && std::isfinite(v);
    }
    if (!finite) {
        std::cout << "verify: FAIL forward pass produced non-finite values\n";
        return 1;
    }
    std::cout << "ok: forward outputs finite at " << image_size << "x" << image_size << "\n";
    std::cout << "verify: PASS\n";
    return 0;
}

int cmd_bench(const std::string& in_path, int warmup, int iters, int image_size,
              bool only_fused, bool only_unfused, const std::string& out_path) {
    const WeightsMeta meta = load_meta(in_path);
    if (meta.detector)
        throw std::runtime_error("bench: expected a classifier model");
    if (meta.fused && only_unfused)
        throw std::runtime_error("bench: " + in_path + " is stored in collapsed form");

    Model m = load_model(in_path);
    const Tensor4 img = seeded_image(image_size, image_size, 0xBE9Cull);
    static volatile float sink;
    auto once = [&img](const Model& model) {
        const Mat logits = backbone_logits(model, img);
        sink = logits.data[0];
    };

    json results = json::array();
    auto push = [&](const char* form, const BenchStats& st) {
        json r;
        r["form"] = form;
        r["mean_ms"] = st.mean_ms;
        r["median_ms"] = st.median_ms;
        r["p95_ms"] = st.p95_ms;
        r["latencies_ms"] = st.latencies_ms;
        results.push_back(r);
    };

    BenchStats unfused_stats, fused_stats;
    bool ran_unfused = false, ran_fused = false;
    if (!meta.fused && !only_fused && !only_unfused) {
        // both forms: alternate timed passes so machine-load drift over
        // the run cannot skew the comparison toward either side
        Model fm = m;
        fuse_model(fm);
        std::tie(unfused_stats, fused_stats) = run_bench_paired(
            [&] { once(m); }, [&] { once(fm); }, warmup, iters);
        push("unfused", unfused_stats);
        push("fused", fused_stats);
        ran_unfused = ran_fused = true;
    } else {
        if (!meta.fused && !only_fused) {
            unfused_stats = run_bench([&] { once(m); }, warmup, iters);
            push("unfused", unfused_stats);
            ran_unfused = true;
        }
        if (!only_unfused) {
            if (!m.fused)
                fuse_model(m);
            fused_stats = run_bench([&] { once(m); }, warmup, iters);
            push("fused", fused_stats);
            ran_fused = true;
        }
    }

    json j;
    j["command"] = "bench";
    j["config"] = {{"variant", meta.variant},
                   {"image_size", image_size},
                   {"warmup", warmup},
                   {"iters", iters},
                   {"backend", kernels::active().name},
                   {"threads", 1}};
    j["results"] = results;
    if (ran_unfused && ran_fused) {
        j["speedup_mean"] = unfused_stats.mean_ms / fused_stats.mean_ms;
        j["speedup_median"] = unfused_stats.median_ms / fused_stats.median_ms;
    }
    j["timestamp"] = timestamp_utc();
    emit(j, out_path);
    return 0;
}

int cmd_detect(const std::string& in_path, const std::string& image_path,
               const std::string& out_path, float score_thresh, float iou_thresh) {
    const WeightsMeta meta = load_meta(in_path);
    if (!meta.detector)
        throw std::runtime_error("detect: " + in_path + " is not a detector");
    const Detector det = load_detector(in_path);

    const Tensor4 img = read_ppm(image_path);
    const Tensor4 norm = normalize_image(img, meta.norm_mean, meta.norm_std);

    DetectOptions opt;
    opt.score_thresh = score_thresh;
    opt.iou_thresh = iou_thresh;
    const std::vector<Detection> dets = detect(det, norm, opt);

    std::ofstream out(out_path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("detect: cannot open " + out_path);
    const std::string image_id = std::filesystem::path(image_path).stem().string();
    for (const Detection& d : dets) {
        json line;
        line["image_id"] = image_id;
        line["class"] = d.cls;
        line["score"] = d.score;
        line["box"] = {d.x1, d.y1, d.x2, d.y2};
        out << line.dump() << "\n";
    }
    std::cout << dets.size() << " detections, wrote " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"reparameterizable vision backbone and detector toolkit"};
    app.require_subcommand(1);

    std::string variant = "s26";
    uint64_t seed = 0;
    int classes = -1;
    bool as_detector = false;
    std::string out_path, in_path, image_path;
    int trials = 3, warmup = 20, iters = 50, image_size = 224, check_size = 64;
    int verify_size = 64;
    double tol = 1e-4;
    bool only_fused = false, only_unfused = false;
    float score_thresh = 0.05f, iou_thresh = 0.6f;

    CLI::App* build = app.add_subcommand("build", "create seeded weights and save them");
    build->add_option("--variant", variant, "model preset")
        ->required()
        ->check(CLI::IsMember(variant_names()));
    build->add_option("--seed", seed, "weight stream seed");
    build->add_option("--classes", classes, "output classes (default 1000, detector 80)");
    build->add_flag("--detector", as_detector, "build the detection pipeline");
    build->add_option("--out", out_path, "weights file to write")->required();

    CLI::App* fuse = app.add_subcommand("fuse", "collapse branches and save the deploy form");
    fuse->add_option("--in", in_path, "training-form weights")->required();
    fuse->add_option("--out", out_path, "collapsed weights to write")->required();
    fuse->add_option("--trials", trials, "equivalence trials per conv unit")
        ->check(CLI::PositiveNumber);
    fuse->add_option("--tol", tol, "per-unit tolerance")->check(CLI::PositiveNumber);
    fuse->add_option("--check-size", check_size, "input extent for the whole-model check")
        ->check(CLI::PositiveNumber);

    CLI::App* verify = app.add_subcommand("verify", "check stored weights and equivalence");
    verify->add_option("--in", in_path, "weights file")->required();
    verify->add_option("--trials", trials, "equivalence trials per conv unit")
        ->check(CLI::PositiveNumber);
    verify->add_option("--tol", tol, "per-unit tolerance")->check(CLI::PositiveNumber);
    verify->add_option("--image-size", verify_size, "input extent for the forward check")
        ->check(CLI::PositiveNumber);

    CLI::App* bench = app.add_subcommand("bench", "time the forward pass");
    bench->add_option("--in", in_path, "weights file")->required();
    bench->add_option("--warmup", warmup, "untimed passes")->check(CLI::NonNegativeNumber);
    bench->add_option("--iters", iters, "timed passes")->check(CLI::PositiveNumber);
    bench->add_option("--image-size", image_size, "square input extent")
        ->check(CLI::PositiveNumber);
    bench->add_flag("--fused", only_fused, "time only the collapsed form");
    bench->add_flag("--unfused", only_unfused, "time only the training form")
        ->excludes("--fused");
    bench->add_option("--out", out_path, "write the json report here instead of stdout");

    CLI::App* det_cmd = app.add_subcommand("detect", "run detection on a ppm image");
    det_cmd->add_option("--in", in_path, "detector weights")->required();
    det_cmd->add_option("--image", image_path, "binary ppm input")->required();
    det_cmd->add_option("--out", out_path, "jsonl results file")->required();
    det_cmd->add_option("--score-thresh", score_thresh, "keep detections above this score");
    det_cmd->add_option("--iou", iou_thresh, "suppression overlap threshold");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed())
            return cmd_build(variant, seed, classes, as_detector, out_path);
        if (fuse->parsed())
            return cmd_fuse(in_path, out_path, trials, tol, check_size);
        if (verify->parsed())
            return cmd_verify(in_path, trials, tol, verify_size);
        if (bench->parsed())
            return cmd_bench(in_path, warmup, iters, image_size, only_fused, only_unfused,
                             out_path);
        if (det_cmd->parsed())
            return cmd_detect(in_path, image_path, out_path, score_thresh, iou_thresh);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
