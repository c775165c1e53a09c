#include "ravit/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace ravit {

static_assert(std::endian::native == std::endian::little,
              "the tensor file layout assumes a little-endian host");

static const char kMagic[4] = {'R', 'A', 'V', 'W'};
static const uint32_t kVersion = 1;

static void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void save_tensors(const std::string& path, const std::vector<TensorRef>& refs) {
    std::set<std::string> seen;
    for (const TensorRef& r : refs)
        if (!seen.insert(r.name).second)
            throw std::runtime_error("save_tensors: duplicate name '" + r.name + "'");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("save_tensors: cannot open " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(refs.size()));
    for (const TensorRef& r : refs) {
        write_u32(out, static_cast<uint32_t>(r.name.size()));
        out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        write_u32(out, static_cast<uint32_t>(r.extents.size()));
        long long prod = 1;
        for (int e : r.extents) {
            write_u32(out, static_cast<uint32_t>(e));
            prod *= e;
        }
        if (prod != static_cast<long long>(r.data->size()))
            throw std::runtime_error("save_tensors: extents of '" + r.name +
                                     "' do not cover its payload");
        out.write(reinterpret_cast<const char*>(r.data->data()),
                  static_cast<std::streamsize>(r.data->size() * sizeof(float)));
    }
    if (!out)
        throw std::runtime_error("save_tensors: write failed for " + path);
}

namespace {

struct Cursor {
    const std::vector<char>& buf;
    size_t pos = 0;

    void need(size_t n, const char* what) {
        if (pos + n > buf.size())
            throw std::runtime_error(std::string("load_tensors: truncated file while reading ") +
                                     what);
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
};

} // namespace

std::vector<LoadedTensor> load_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_tensors: cannot open " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Cursor cur{buf};
    cur.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("load_tensors: bad magic in " + path);
    cur.pos = 4;
    const uint32_t version = cur.u32("version");
    if (version != kVersion)
        throw std::runtime_error("load_tensors: unsupported version " + std::to_string(version));
    const uint32_t count = cur.u32("tensor count");

    std::vector<LoadedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        LoadedTensor t;
        const uint32_t name_len = cur.u32("name length");
        cur.need(name_len, "name");
        t.name.assign(buf.data() + cur.pos, name_len);
        cur.pos += name_len;
        const uint32_t rank = cur.u32("rank");
        if (rank == 0 || rank > 4)
            throw std::runtime_error("load_tensors: implausible rank for '" + t.name + "'");
        size_t total = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            const uint32_t e = cur.u32("extent");
            t.extents.push_back(static_cast<int>(e));
            total *= e;
        }
        cur.need(total * sizeof(float), "payload");
        t.data.resize(total);
        std::memcpy(t.data.data(), buf.data() + cur.pos, total * sizeof(float));
        cur.pos += total * sizeof(float);
        out.push_back(std::move(t));
    }
    if (cur.pos != buf.size())
        throw std::runtime_error("load_tensors: trailing bytes after the last tensor in " + path);
    return out;
}

void save_meta(const std::string& path, const WeightsMeta& meta) {
    nlohmann::json j;
    j["variant"] = meta.variant;
    j["seed"] = meta.seed;
    j["fused"] = meta.fused;
    j["detector"] = meta.detector;
    j["num_classes"] = meta.num_classes;
    j["norm_mean"] = meta.norm_mean;
    j["norm_std"] = meta.norm_std;
    std::ofstream out(path + ".json", std::ios::trunc);
    if (!out)
        throw std::runtime_error("save_meta: cannot open " + path + ".json");
    out << j.dump(2) << "\n";
}

WeightsMeta load_meta(const std::string& path) {
    std::ifstream in(path + ".json");
    if (!in)
        throw std::runtime_error("load_meta: cannot open " + path + ".json");
    WeightsMeta meta;
    try {
        nlohmann::json j;
        in >> j;
        meta.variant = j.at("variant").get<std::string>();
        meta.seed = j.at("seed").get<uint64_t>();
        meta.fused = j.at("fused").get<bool>();
        meta.detector = j.at("detector").get<bool>();
        meta.num_classes = j.at("num_classes").get<int>();
        meta.norm_mean = j.at("norm_mean").get<std::vector<float>>();
        meta.norm_std = j.at("norm_std").get<std::vector<float>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_meta: cannot parse " + path + ".json: " + e.what());
    }
    if (meta.norm_mean.size() != 3 || meta.norm_std.size() != 3)
        throw std::runtime_error("load_meta: norm constants must have three channels");
    return meta;
}

static std::string extents_str(const std::vector<int>& e) {
    std::string s;
    for (size_t i = 0; i < e.size(); ++i)
        s += (i ? "x" : "") + std::to_string(e[i]);
    return s;
}

static void apply_tensors(const std::vector<TensorRef>& refs,
                          const std::vector<LoadedTensor>& loaded, const std::string& path) {
    std::unordered_map<std::string, const LoadedTensor*> by_name;
    for (const LoadedTensor& t : loaded)
        by_name[t.name] = &t;
    if (by_name.size() != loaded.size())
        throw std::runtime_error("load: duplicate tensor names in " + path);
    for (const TensorRef& r : refs) {
        auto it = by_name.find(r.name);
        if (it == by_name.end())
            throw std::runtime_error("load: " + path + " has no tensor '" + r.name + "'");
        const LoadedTensor& t = *it->second;
        if (t.extents != r.extents)
            throw std::runtime_error("load: tensor '" + r.name + "' extents " +
                                     extents_str(t.extents) + " in " + path +
                                     " do not match the model's " + extents_str(r.extents));
        *r.data = t.data;
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw std::runtime_error("load: unexpected tensor '" + by_name.begin()->first + "' in " +
                                 path);
}

void save_model(const std::string& path, Model& m) {
    save_tensors(path, model_tensors(m));
    WeightsMeta meta;
    meta.variant = m.cfg.name;
    meta.seed = m.seed;
    meta.fused = m.fused;
    meta.detector = false;
    meta.num_classes = m.num_classes;
    save_meta(path, meta);
}

Model load_model(const std::string& path) {
    WeightsMeta meta = load_meta(path);
    if (meta.detector)
        throw std::runtime_error("load_model: " + path + " holds a detector");
    Model m = build_model(variant_config(meta.variant), meta.seed, meta.num_classes, true);
    if (meta.fused)
        fuse_model(m);
    apply_tensors(model_tensors(m), load_tensors(path), path);
    return m;
}

void save_detector(const std::string& path, Detector& det) {
    save_tensors(path, detector_tensors(det));
    WeightsMeta meta;
    meta.variant = det.backbone.cfg.name;
    meta.seed = det.seed;
    meta.fused = det.fused;
    meta.detector = true;
    meta.num_classes = det.head.num_classes;
    save_meta(path, meta);
}

Detector load_detector(const std::string& path) {
    WeightsMeta meta = load_meta(path);
    if (!meta.detector)
        throw std::runtime_error("load_detector: " + path + " holds a classifier");
    Detector det = build_detector(variant_config(meta.variant), meta.seed, meta.num_classes);
    if (meta.fused)
        fuse_detector(det);
    apply_tensors(detector_tensors(det), load_tensors(path), path);
    return det;
}

} // namespace ravit
