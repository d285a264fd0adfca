#include "hlstm/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hlstm/errors.hpp"
#include "hlstm/image_io.hpp"
#include "json.hpp"

namespace hlstm {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string layer_suffix(std::size_t k) { return "_sp" + std::to_string(k); }

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(what + ": " + e.what());
    }
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path, "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError(path, "cannot open for writing");
    out << text;
    out.flush();
    if (!out) throw FileError(path, "write failed");
}

void write_superpixel_map(const std::string& pgm_path, const std::string& json_path, const SuperpixelMap& map) {
    if (map.region_count > 65536) throw std::invalid_argument("superpixel map has more than 65536 regions");
    GrayImage g{map.height, map.width, 65535, std::vector<std::uint16_t>(map.assignment.begin(), map.assignment.end())};
    write_pgm(pgm_path, g);
    json meta{{"scale", map.scale}, {"region_count", map.region_count}};
    write_text_file(json_path, meta.dump(2) + "\n");
}

SuperpixelMap read_superpixel_map(const std::string& pgm_path, const std::string& json_path) {
    const GrayImage g = read_pgm(pgm_path);
    const json meta = parse_json(read_text_file(json_path), json_path);
    SuperpixelMap map;
    map.height = g.height;
    map.width = g.width;
    try {
        map.scale = meta.at("scale").get<double>();
        map.region_count = meta.at("region_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(json_path + ": " + e.what());
    }
    map.assignment.assign(g.values.begin(), g.values.end());
    if (!is_partition(map)) throw FormatError(pgm_path + ": region ids do not form a partition of region_count regions");
    return map;
}

std::string relations_to_json(const std::vector<RelationTruth>& truth, const std::vector<double>& scales) {
    if (truth.size() != scales.size()) throw std::invalid_argument("relations_to_json: one scale per layer expected");
    json layers = json::array();
    for (std::size_t k = 0; k < truth.size(); ++k) {
        json pairs = json::array();
        for (const auto& [key, label] : truth[k]) {
            pairs.push_back({{"region_a", key.first}, {"region_b", key.second}, {"relation", std::string(relation_name(label))}});
        }
        layers.push_back({{"scale", scales[k]}, {"pairs", std::move(pairs)}});
    }
    return json{{"layers", std::move(layers)}}.dump(1) + "\n";
}

std::vector<RelationTruth> relations_from_json(const std::string& text, std::vector<double>* scales) {
    const json doc = parse_json(text, "relation document");
    std::vector<RelationTruth> out;
    if (scales) scales->clear();
    try {
        for (const json& layer : doc.at("layers")) {
            RelationTruth truth;
            for (const json& p : layer.at("pairs")) {
                truth[{p.at("region_a").get<std::uint32_t>(), p.at("region_b").get<std::uint32_t>()}] =
                    relation_from_name(p.at("relation").get<std::string>());
            }
            out.push_back(std::move(truth));
            if (scales) scales->push_back(layer.at("scale").get<double>());
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("relation document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("relation document: ") + e.what());
    }
    return out;
}

std::string predictions_to_json(const std::vector<RelationGraphPrediction>& predictions) {
    json out = json::array();
    for (const RelationGraphPrediction& layer : predictions) {
        for (const RelationPrediction& p : layer.pairs) {
            out.push_back({{"scale", layer.scale},
                           {"region_a", p.region_a},
                           {"region_b", p.region_b},
                           {"probs", p.probs},
                           {"argmax", std::string(relation_name(p.argmax()))}});
        }
    }
    return out.dump(1) + "\n";
}

void write_example(const std::string& dir, const std::string& stem, const TrainingExample& example) {
    write_ppm(join(dir, stem + ".ppm"), example.image);
    write_label_pgm(join(dir, stem + "_labels.pgm"), example.surface);
    std::vector<double> scales;
    for (const SuperpixelMap& m : example.structure.maps) scales.push_back(m.scale);
    write_text_file(join(dir, stem + "_relations.json"), relations_to_json(example.relations, scales));
    for (std::size_t k = 0; k < example.structure.maps.size(); ++k) {
        write_superpixel_map(join(dir, stem + layer_suffix(k) + ".pgm"), join(dir, stem + layer_suffix(k) + ".json"),
                             example.structure.maps[k]);
    }
}

TrainingExample read_example(const std::string& dir, const std::string& stem, const ModelConfig& config) {
    TrainingExample ex;
    ex.image = read_ppm(join(dir, stem + ".ppm"));
    const std::string label_path = join(dir, stem + "_labels.pgm");
    ex.surface = read_label_pgm(label_path, config.num_classes);
    if (ex.surface.height != ex.image.dim(1) || ex.surface.width != ex.image.dim(2)) {
        throw FormatError(label_path + ": label map extents differ from the image");
    }
    const std::string rel_path = join(dir, stem + "_relations.json");
    std::vector<double> scales;
    ex.relations = relations_from_json(read_text_file(rel_path), &scales);
    if (scales != config.scales) throw FormatError(rel_path + ": relation scales differ from the configured scales");
    for (std::size_t k = 0; k < config.scales.size(); ++k) {
        const std::string pgm = join(dir, stem + layer_suffix(k) + ".pgm");
        SuperpixelMap map = read_superpixel_map(pgm, join(dir, stem + layer_suffix(k) + ".json"));
        if (map.height != ex.surface.height || map.width != ex.surface.width) {
            throw FormatError(pgm + ": superpixel map extents differ from the image");
        }
        ex.structure.graphs.push_back(adjacency(map));
        for (const auto& pair : ex.structure.graphs.back().ordered_pairs) {
            if (!ex.relations[k].contains(pair)) throw FormatError(rel_path + ": missing relation for an adjacent pair");
        }
        ex.structure.maps.push_back(std::move(map));
    }
    return ex;
}

void write_dataset(const std::string& dir, const std::vector<TrainingExample>& examples, const ModelConfig& config) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw FileError(dir, "cannot create directory: " + ec.message());
    json stems = json::array();
    for (std::size_t i = 0; i < examples.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "scene_%04zu", i);
        write_example(dir, stem, examples[i]);
        stems.push_back(stem);
    }
    json doc{{"examples", std::move(stems)}, {"config", json::parse(to_json_string(config))}};
    write_text_file(join(dir, "dataset.json"), doc.dump(2) + "\n");
}

std::vector<TrainingExample> read_dataset(const std::string& dir, const ModelConfig& config) {
    const std::string index = join(dir, "dataset.json");
    const json doc = parse_json(read_text_file(index), index);
    std::vector<TrainingExample> out;
    try {
        for (const json& stem : doc.at("examples")) out.push_back(read_example(dir, stem.get<std::string>(), config));
    } catch (const json::exception& e) {
        throw FormatError(index + ": " + e.what());
    }
    return out;
}

}  // namespace hlstm
