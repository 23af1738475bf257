#include "ggt/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ggt/tensor_io.hpp"

namespace ggt {

using nlohmann::json;

namespace {

json config_json(const ModelConfig& cfg) {
    return {
        {"name", cfg.name},
        {"in_channels", cfg.in_channels},
        {"patch", cfg.patch},
        {"embed_dim", cfg.embed_dim},
        {"depths", cfg.depths},
        {"heads", cfg.heads},
        {"m", cfg.m},
        {"mlp_ratio", cfg.mlp_ratio},
        {"gaze", cfg.gaze.policy == GazeConfig::Policy::adaptive ? "adaptive" : "fixed"},
        {"gaze_kernel", cfg.gaze.fixed_kernel},
        {"rel_pos_bias", cfg.rel_pos_bias},
        {"num_classes", cfg.num_classes},
        {"image_h", cfg.image_h},
        {"image_w", cfg.image_w},
    };
}

ModelConfig parse_config(const json& j) {
    ModelConfig cfg;
    try {
        cfg.name = j.at("name").get<std::string>();
        cfg.in_channels = j.at("in_channels").get<std::size_t>();
        cfg.patch = j.at("patch").get<std::size_t>();
        cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
        cfg.depths = j.at("depths").get<std::array<std::size_t, kStages>>();
        cfg.heads = j.at("heads").get<std::array<std::size_t, kStages>>();
        cfg.m = j.at("m").get<std::size_t>();
        cfg.mlp_ratio = j.at("mlp_ratio").get<double>();
        const auto policy = j.at("gaze").get<std::string>();
        const auto k = j.at("gaze_kernel").get<std::size_t>();
        if (policy == "adaptive") {
            cfg.gaze = GazeConfig::adaptive();
        } else if (policy == "fixed") {
            cfg.gaze = GazeConfig::fixed(k);
        } else {
            throw FormatError("checkpoint: unknown gaze policy '" + policy + "'");
        }
        cfg.rel_pos_bias = j.at("rel_pos_bias").get<bool>();
        cfg.num_classes = j.at("num_classes").get<std::size_t>();
        cfg.image_h = j.at("image_h").get<std::size_t>();
        cfg.image_w = j.at("image_w").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::filesystem::path binary_path(const std::filesystem::path& manifest) {
    auto p = manifest;
    p.replace_extension(".bin");
    return p;
}

} // namespace

std::string config_to_json(const ModelConfig& cfg) {
    return config_json(cfg).dump(2);
}

ModelConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config json: ") + e.what());
    }
    return parse_config(j);
}

template <typename T>
void save_checkpoint(const std::filesystem::path& manifest, const ModelWeights<T>& weights) {
    const auto bin = binary_path(manifest);
    if (bin == manifest) throw FormatError("checkpoint: manifest must not use the .bin extension");
    std::ofstream data(bin, std::ios::binary);
    if (!data) throw FormatError("cannot open " + bin.string() + " for writing");
    json params = json::array();
    std::uint64_t offset = 0;
    weights.for_each_parameter([&](const std::string& name, const Parameter<T>& p) {
        const std::size_t bytes = ggt1_record_size(p.value.shape());
        write_ggt1(data, p.value.template cast<float>());
        params.push_back({{"name", name}, {"shape", p.value.shape()}, {"offset", offset}, {"bytes", bytes}});
        offset += bytes;
    });
    data.close();
    if (!data) throw FormatError("checkpoint: write to " + bin.string() + " failed");
    const json doc = {{"format", "ggt-checkpoint"},
                      {"version", 1},
                      {"binary", bin.filename().string()},
                      {"config", config_json(weights.config)},
                      {"parameters", params}};
    std::ofstream out(manifest);
    if (!out) throw FormatError("cannot open " + manifest.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw FormatError("checkpoint: write to " + manifest.string() + " failed");
}

template <typename T>
ModelWeights<T> load_checkpoint(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw FormatError("cannot open " + manifest.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint manifest " + manifest.string() + ": " + e.what());
    }
    if (doc.value("format", "") != "ggt-checkpoint") throw FormatError("checkpoint: not a ggt checkpoint manifest");
    ModelWeights<T> weights = zero_model<T>(parse_config(doc.at("config")));

    struct Entry {
        Shape shape;
        std::uint64_t offset;
    };
    std::map<std::string, Entry> entries;
    try {
        for (const auto& p : doc.at("parameters")) {
            entries[p.at("name").get<std::string>()] = {p.at("shape").get<Shape>(), p.at("offset").get<std::uint64_t>()};
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint parameters: ") + e.what());
    }

    const auto bin = manifest.parent_path() / doc.at("binary").get<std::string>();
    std::ifstream data(bin, std::ios::binary);
    if (!data) throw FormatError("cannot open " + bin.string());
    std::size_t used = 0;
    weights.for_each_parameter([&](const std::string& name, Parameter<T>& p) {
        const auto it = entries.find(name);
        if (it == entries.end()) throw FormatError("checkpoint: missing parameter " + name);
        if (it->second.shape != p.value.shape()) {
            throw FormatError("checkpoint: " + name + " has shape " + shape_str(it->second.shape) + ", model expects " +
                              shape_str(p.value.shape()));
        }
        data.seekg(static_cast<std::streamoff>(it->second.offset));
        TensorF t = read_ggt1(data);
        if (t.shape() != p.value.shape()) throw FormatError("checkpoint: record for " + name + " has wrong shape");
        p = Parameter<T>(t.template cast<T>());
        ++used;
    });
    if (used != entries.size()) throw FormatError("checkpoint: manifest lists parameters the model does not have");
    return weights;
}

template void save_checkpoint(const std::filesystem::path&, const ModelWeights<double>&);
template void save_checkpoint(const std::filesystem::path&, const ModelWeights<float>&);
template ModelWeights<double> load_checkpoint(const std::filesystem::path&);
template ModelWeights<float> load_checkpoint(const std::filesystem::path&);

} // namespace ggt
