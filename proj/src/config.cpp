#include "hlstm/config.hpp"

#include <fstream>
#include <sstream>

#include "hlstm/errors.hpp"
#include "json.hpp"

namespace hlstm {
namespace {

using nlohmann::json;

const char* to_string(HiddenFrom mode) { return mode == HiddenFrom::kCurrent ? "current" : "previous"; }
const char* to_string(ScaleMeaning meaning) {
    return meaning == ScaleMeaning::kPixelsPerRegion ? "pixels_per_region" : "region_count";
}

HiddenFrom hidden_from_string(const std::string& s) {
    if (s == "current") return HiddenFrom::kCurrent;
    if (s == "previous") return HiddenFrom::kPrevious;
    throw ConfigError("hidden_from_memory must be \"current\" or \"previous\", got \"" + s + "\"");
}

ScaleMeaning scale_meaning_from_string(const std::string& s) {
    if (s == "pixels_per_region") return ScaleMeaning::kPixelsPerRegion;
    if (s == "region_count") return ScaleMeaning::kRegionCount;
    throw ConfigError("scale_means must be \"pixels_per_region\" or \"region_count\", got \"" + s + "\"");
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
    if (image_channels == 0) fail("image_channels must be >= 1");
    if (d == 0) fail("d must be >= 1");
    if (neighbors != 8) fail("neighbors must be 8 (the eight-connected direction set)");
    if (num_plstm_layers == 0) fail("num_plstm_layers must be >= 1");
    if (scales.size() != num_mslstm_layers) fail("length(scales) must equal num_mslstm_layers");
    if (num_mslstm_layers > num_plstm_layers) {
        fail("num_mslstm_layers must not exceed num_plstm_layers (each MS-LSTM layer reads one P-LSTM layer)");
    }
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] >= 1.0)) fail("scales must be >= 1");
        if (i > 0) {
            const bool ordered = scale_means == ScaleMeaning::kPixelsPerRegion ? scales[i] > scales[i - 1]
                                                                               : scales[i] < scales[i - 1];
            if (!ordered) {
                fail(scale_means == ScaleMeaning::kPixelsPerRegion
                         ? "scales must be strictly increasing"
                         : "region-count scales must be strictly decreasing (coarser layers have fewer regions)");
            }
        }
    }
    if (!(pi_smooth > 0.0)) fail("pi_smooth must be > 0");
    if (num_classes < 2 || num_classes > 255) fail("num_classes must be in [2, 255]");
    if (conv_channels.empty()) fail("conv_channels must name at least one layer");
    for (std::size_t c : conv_channels) {
        if (c == 0) fail("conv_channels entries must be >= 1");
    }
    if (!(slic_compactness > 0.0)) fail("slic_compactness must be > 0");
    if (slic_iterations == 0) fail("slic_iterations must be >= 1");
    if (!(lr_lstm >= 0.0) || !(lr_cnn >= 0.0)) fail("learning rates must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
    if (!(lr_decay_gamma > 0.0)) fail("lr_decay_gamma must be > 0");
}

ModelConfig desk_preset() {
    ModelConfig c;
    c.d = 8;
    c.num_plstm_layers = 2;
    c.num_mslstm_layers = 2;
    c.scales = {16, 64};
    c.conv_channels = {32, 32};
    c.relation_hidden = 16;
    c.lr_lstm = 0.1;
    c.lr_cnn = 0.01;
    c.momentum = 0.9;
    c.batch_size = 4;
    return c;
}

ModelConfig paper_preset() { return ModelConfig{}; }

ModelConfig preset_by_name(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    throw ConfigError("unknown preset \"" + name + "\" (expected desk or paper)");
}

std::string to_json_string(const ModelConfig& c, int indent) {
    json j;
    j["image_channels"] = c.image_channels;
    j["d"] = c.d;
    j["neighbors"] = c.neighbors;
    j["num_plstm_layers"] = c.num_plstm_layers;
    j["num_mslstm_layers"] = c.num_mslstm_layers;
    j["scales"] = c.scales;
    j["scale_means"] = to_string(c.scale_means);
    j["pi_smooth"] = c.pi_smooth;
    j["num_classes"] = c.num_classes;
    j["conv_channels"] = c.conv_channels;
    j["relation_hidden"] = c.relation_hidden;
    j["hidden_from_memory"] = to_string(c.hidden_from_memory);
    j["slic_compactness"] = c.slic_compactness;
    j["slic_iterations"] = c.slic_iterations;
    j["lr_lstm"] = c.lr_lstm;
    j["lr_cnn"] = c.lr_cnn;
    j["momentum"] = c.momentum;
    j["batch_size"] = c.batch_size;
    j["lr_decay_step"] = c.lr_decay_step;
    j["lr_decay_gamma"] = c.lr_decay_gamma;
    j["seed"] = c.seed;
    return j.dump(indent);
}

ModelConfig config_from_json_string(const std::string& text, const ModelConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    ModelConfig c = base;
    if (j.contains("preset")) {
        std::string name;
        read_key(j, "preset", name);
        c = preset_by_name(name);
    }
    read_key(j, "image_channels", c.image_channels);
    read_key(j, "d", c.d);
    read_key(j, "neighbors", c.neighbors);
    read_key(j, "num_plstm_layers", c.num_plstm_layers);
    read_key(j, "num_mslstm_layers", c.num_mslstm_layers);
    read_key(j, "scales", c.scales);
    if (j.contains("scale_means")) {
        std::string s;
        read_key(j, "scale_means", s);
        c.scale_means = scale_meaning_from_string(s);
    }
    read_key(j, "pi_smooth", c.pi_smooth);
    read_key(j, "num_classes", c.num_classes);
    read_key(j, "conv_channels", c.conv_channels);
    read_key(j, "relation_hidden", c.relation_hidden);
    if (j.contains("hidden_from_memory")) {
        std::string s;
        read_key(j, "hidden_from_memory", s);
        c.hidden_from_memory = hidden_from_string(s);
    }
    read_key(j, "slic_compactness", c.slic_compactness);
    read_key(j, "slic_iterations", c.slic_iterations);
    read_key(j, "lr_lstm", c.lr_lstm);
    read_key(j, "lr_cnn", c.lr_cnn);
    read_key(j, "momentum", c.momentum);
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "lr_decay_step", c.lr_decay_step);
    read_key(j, "lr_decay_gamma", c.lr_decay_gamma);
    read_key(j, "seed", c.seed);
    c.validate();
    return c;
}

ModelConfig load_config(const std::string& path, const ModelConfig& base) {
    std::ifstream in(path);
    if (!in) throw FileError(path, "cannot open config");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json_string(buffer.str(), base);
}

}  // namespace hlstm
