#pragma once
// Model checkpoint file: a JSON document with a manifest and a map from
// parameter name to {shape, values}. Doubles are written in shortest
// round-trip form, so save/load is bit-exact.

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "nn.hpp"

namespace prefnp {

using json = nlohmann::ordered_json;

struct ModelCheckpoint {
    std::string model_kind;
    json spec;  // model-kind specific hyperparameters
    uint64_t rng_seed = 0;
    int64_t step = 0;
    ParamSet params;
};

inline json checkpoint_to_json(const ModelCheckpoint& ckpt) {
    json j;
    j["format_version"] = 1;
    j["model_kind"] = ckpt.model_kind;
    j["spec"] = ckpt.spec;
    j["rng_seed"] = ckpt.rng_seed;
    j["step"] = ckpt.step;
    json params = json::object();
    for (const std::string& name : ckpt.params.names()) {
        const Tensor& t = ckpt.params.value(name);
        json entry;
        entry["shape"] = t.shape;
        entry["values"] = t.data;
        params[name] = std::move(entry);
    }
    j["params"] = std::move(params);
    return j;
}

inline ModelCheckpoint checkpoint_from_json(const json& j) {
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw std::runtime_error("checkpoint: unsupported format_version");
    ModelCheckpoint ckpt;
    ckpt.model_kind = j.at("model_kind").get<std::string>();
    ckpt.spec = j.at("spec");
    ckpt.rng_seed = j.at("rng_seed").get<uint64_t>();
    ckpt.step = j.at("step").get<int64_t>();
    for (const auto& [name, entry] : j.at("params").items()) {
        Tensor t;
        t.shape = entry.at("shape").get<std::vector<size_t>>();
        t.data = entry.at("values").get<std::vector<double>>();
        if (t.data.size() != Tensor::count(t.shape))
            throw std::runtime_error("checkpoint: shape/value mismatch for " + name);
        ckpt.params.add(name, std::move(t));
    }
    return ckpt;
}

inline void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out << checkpoint_to_json(ckpt).dump(1, '\t') << "\n";
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    json j = json::parse(in);
    return checkpoint_from_json(j);
}

}  // namespace prefnp
