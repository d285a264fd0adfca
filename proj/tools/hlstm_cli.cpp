// Command-line front end: synth, train, eval, parse, reconstruct, gradcheck.
//
// Exit codes: 0 ok, 1 failure, 2 usage, 3 missing or unreadable file,
// 4 malformed config, 5 checkpoint/config shape mismatch, 6 malformed data file.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hlstm/checkpoint.hpp"
#include "hlstm/dataset.hpp"
#include "hlstm/errors.hpp"
#include "hlstm/image_io.hpp"
#include "hlstm/metrics.hpp"
#include "hlstm/numerics.hpp"
#include "hlstm/plstm.hpp"
#include "hlstm/reconstruct.hpp"
#include "hlstm/synthetic.hpp"
#include "hlstm/training.hpp"
#include "json.hpp"

using namespace hlstm;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kMissingFile = 3, kBadConfig = 4, kShapeMismatch = 5, kBadData = 6 };

struct ConfigFlags {
    std::string preset;
    std::string config_path;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "Named config: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
        cmd->add_option("--config", config_path, "Config JSON; keys override the preset");
        cmd->add_option("--seed", seed, "RNG seed");
    }
    bool given() const { return !preset.empty() || !config_path.empty(); }

    ModelConfig resolve(const ModelConfig& fallback) const {
        ModelConfig c = preset.empty() ? fallback : preset_by_name(preset);
        if (!config_path.empty()) c = load_config(config_path, c);
        if (seed) c.seed = *seed;
        c.validate();
        return c;
    }
};

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

ModelConfig dataset_config(const std::string& dir) {
    const std::string index = join(dir, "dataset.json");
    try {
        return config_from_json_string(json::parse(read_text_file(index)).at("config").dump());
    } catch (const json::exception& e) {
        throw FormatError(index + ": " + e.what());
    }
}

// With --preset or --config, the checkpoint must fit that config.
HLstmModel open_model(const std::string& path, const ConfigFlags& flags) {
    if (!flags.given()) return load_checkpoint(path);
    return load_checkpoint(path, flags.resolve(desk_preset()));
}

SurfaceLabelMap concatenated(const std::vector<SurfaceLabelMap>& maps) {
    SurfaceLabelMap all(1, 0, maps.empty() ? kMainClassCount : maps.front().num_classes);
    for (const SurfaceLabelMap& m : maps) all.labels.insert(all.labels.end(), m.labels.begin(), m.labels.end());
    all.width = all.labels.size();
    return all;
}

json nan_to_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    ConfigFlags config;
    std::size_t count = 20;
    std::size_t size = 32;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    const ModelConfig config = a.config.resolve(desk_preset());
    const std::vector<TrainingExample> data = generate_dataset(a.count, a.size, config.seed, config);
    write_dataset(a.out, data, config);
    std::printf("wrote %zu scenes of %zux%zu to %s\n", data.size(), a.size, a.size, a.out.c_str());
    return kOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    ConfigFlags config;
    std::string data;
    std::string out;
    std::size_t epochs = 100;
    std::size_t save_every = 0;
    bool surface_only = false;
};

int run_train(const TrainArgs& a) {
    const ModelConfig config = a.config.resolve(dataset_config(a.data));
    const std::vector<TrainingExample> data = read_dataset(a.data, config);
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw FileError(a.out, "cannot create directory: " + ec.message());

    HLstmModel model(config);
    TrainOptions options;
    options.epochs = a.epochs;
    options.loss.use_relation_loss = !a.surface_only;
    options.on_epoch = [&](const EpochRecord& r) {
        const std::size_t done = r.epoch + 1;
        if (done % 10 == 0 || done == a.epochs) std::fprintf(stderr, "epoch %zu loss %.6f\n", done, r.mean_loss);
        if (a.save_every > 0 && done % a.save_every == 0) {
            save_checkpoint(join(a.out, "model_epoch" + std::to_string(done) + ".ckpt"), model);
        }
        return true;
    };
    const TrainLog log = train(model, data, options);
    save_checkpoint(join(a.out, "model.ckpt"), model);

    json steps = json::array();
    for (const StepRecord& s : log.steps) steps.push_back({{"epoch", s.epoch}, {"step", s.step}, {"loss", s.loss}});
    json epochs = json::array();
    for (const EpochRecord& e : log.epochs) epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}});
    write_text_file(join(a.out, "loss_log.json"), json{{"steps", steps}, {"epochs", epochs}}.dump(2) + "\n");
    std::printf("trained %zu epochs on %zu scenes, checkpoint %s\n", log.epochs.size(), data.size(),
                join(a.out, "model.ckpt").c_str());
    return kOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
    ConfigFlags config;
    std::string model;
    std::string data;
};

int run_eval(const EvalArgs& a) {
    const HLstmModel model = open_model(a.model, a.config);
    const std::vector<TrainingExample> data = read_dataset(a.data, model.config());
    if (data.empty()) throw FormatError(a.data + ": dataset has no examples");
    const std::size_t layers = model.config().num_mslstm_layers;

    std::vector<SurfaceLabelMap> predicted;
    std::vector<SurfaceLabelMap> truth;
    std::vector<std::vector<ScoredPair>> scored(layers);
    for (const TrainingExample& e : data) {
        const ForwardPass pass = model.forward(e.image, e.structure);
        predicted.push_back(argmax_labels(pass.probs));
        truth.push_back(e.surface);
        for (std::size_t k = 0; k < layers; ++k) {
            const std::vector<ScoredPair> s = score_pairs(pass.relations[k], e.relations[k]);
            scored[k].insert(scored[k].end(), s.begin(), s.end());
        }
    }
    const SurfaceLabelMap all_pred = concatenated(predicted);
    const SurfaceLabelMap all_truth = concatenated(truth);
    json ap = json::array();
    json acc = json::array();
    for (const auto& s : scored) {
        ap.push_back(nan_to_null(relation_average_precision(s)));
        acc.push_back(nan_to_null(relation_accuracy(s)));
    }
    const json report{{"examples", data.size()},
                      {"pixel_accuracy", pixel_accuracy(all_pred, all_truth)},
                      {"mean_accuracy", mean_accuracy(all_pred, all_truth)},
                      {"relation_ap", ap},
                      {"relation_accuracy", acc}};
    std::cout << report.dump(2) << '\n';
    return kOk;
}

// --- parse -----------------------------------------------------------------

struct ParseArgs {
    ConfigFlags config;
    std::string model;
    std::string image;
    std::string out;
    std::string name;
};

int run_parse(const ParseArgs& a) {
    const HLstmModel model = open_model(a.model, a.config);
    const Tensor image = read_ppm(a.image);
    const SceneStructure structure = model.segment(image);
    const ForwardPass pass = model.forward(image, structure);
    const std::string stem = a.name.empty() ? fs::path(a.image).stem().string() : a.name;
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw FileError(a.out, "cannot create directory: " + ec.message());

    write_label_pgm(join(a.out, stem + "_labels.pgm"), argmax_labels(pass.probs));
    write_text_file(join(a.out, stem + "_relations.json"), predictions_to_json(pass.relations));
    for (std::size_t k = 0; k < structure.maps.size(); ++k) {
        const std::string sp = stem + "_sp" + std::to_string(k);
        write_superpixel_map(join(a.out, sp + ".pgm"), join(a.out, sp + ".json"), structure.maps[k]);
    }
    std::printf("wrote %s_labels.pgm and %s_relations.json to %s\n", stem.c_str(), stem.c_str(), a.out.c_str());
    return kOk;
}

// --- reconstruct -----------------------------------------------------------

struct ReconstructArgs {
    ConfigFlags config;
    std::string model;
    std::string image;
    std::string data;
    std::string stem;
    std::string out;
    std::string name = "scene";
    std::size_t layer = 0;
    double height = 1.6;
};

int run_reconstruct(const ReconstructArgs& a) {
    Tensor image;
    SurfaceLabelMap labels;
    SuperpixelMap map;
    RelationGraphPrediction relations;
    if (!a.model.empty()) {
        if (a.image.empty()) throw CLI::ValidationError("--model needs --image");
        const HLstmModel model = open_model(a.model, a.config);
        image = read_ppm(a.image);
        const SceneStructure structure = model.segment(image);
        const ForwardPass pass = model.forward(image, structure);
        if (a.layer >= structure.maps.size()) throw CLI::ValidationError("--layer is beyond the MS-LSTM layers");
        labels = argmax_labels(pass.probs);
        map = structure.maps[a.layer];
        relations = pass.relations[a.layer];
    } else {
        if (a.data.empty() || a.stem.empty()) throw CLI::ValidationError("give --model and --image, or --data and --stem");
        TrainingExample e = read_example(a.data, a.stem, dataset_config(a.data));
        if (a.layer >= e.structure.maps.size()) throw CLI::ValidationError("--layer is beyond the MS-LSTM layers");
        image = std::move(e.image);
        labels = std::move(e.surface);
        map = e.structure.maps[a.layer];
        relations = prediction_from_truth(map, e.relations[a.layer]);
    }
    const std::vector<Boundary> boundaries = extract_boundaries(labels, relations, map);
    CameraOptions camera;
    camera.height = a.height;
    const PopUpModel popup = build_model(labels, boundaries, estimate_horizon(boundaries, labels.height), camera);
    export_obj(popup, image, a.out, a.name);
    std::printf("wrote %zu planes to %s\n", popup.planes.size(), join(a.out, a.name + ".obj").c_str());
    return kOk;
}

// --- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
    std::size_t d = 2;
    std::size_t size = 4;
    std::uint64_t seed = 1;
    std::string mode = "both";
};

int run_gradcheck(const GradcheckArgs& a) {
    constexpr double kEps = 1e-5;
    constexpr double kTol = 1e-4;
    std::vector<HiddenFrom> modes;
    if (a.mode != "previous") modes.push_back(HiddenFrom::kCurrent);
    if (a.mode != "current") modes.push_back(HiddenFrom::kPrevious);

    double worst = 0.0;
    for (HiddenFrom mode : modes) {
        ModelConfig config = desk_preset();
        config.d = a.d;
        config.num_plstm_layers = 2;
        config.num_mslstm_layers = 2;
        config.scales = {4, 8};
        config.conv_channels = {4, 4};
        config.relation_hidden = 4;
        config.hidden_from_memory = mode;
        config.seed = a.seed;
        config.validate();
        HLstmModel model(config);
        const std::vector<TrainingExample> data = generate_dataset(1, a.size, a.seed + 1, config);
        const std::vector<const TrainingExample*> batch{&data.front()};
        const LossAndGrad lg = loss_and_gradient(model, batch);

        std::vector<const Tensor*> grads;
        lg.grads.for_each([&](const std::string&, ParamGroup, const Tensor& t) { grads.push_back(&t); });
        std::size_t index = 0;
        model.params().for_each([&](const std::string& name, ParamGroup, Tensor& t) {
            const Tensor& g = *grads[index++];
            double param_worst = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double orig = t[i];
                t[i] = orig + kEps;
                const double fp = total_loss(model, batch);
                t[i] = orig - kEps;
                const double fm = total_loss(model, batch);
                t[i] = orig;
                param_worst = std::max(param_worst, relative_error(g[i], (fp - fm) / (2.0 * kEps)));
            }
            std::printf("%-8s %-28s %6zu  %.3e\n", mode == HiddenFrom::kCurrent ? "current" : "previous",
                        name.c_str(), t.size(), param_worst);
            worst = std::max(worst, param_worst);
        });
    }
    const bool ok = worst < kTol;
    std::printf("max relative error %.3e: %s\n", worst, ok ? "ok" : "FAILED");
    return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surface labeling, region relations and pop-up reconstruction"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset directory");
    synth.config.add_to(synth_cmd);
    synth_cmd->add_option("--count", synth.count, "Number of scenes")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--size", synth.size, "Image width and height")->check(CLI::Range(4, 4096));
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "Train on a dataset directory");
    train_args.config.add_to(train_cmd);
    train_cmd->add_option("--data", train_args.data, "Dataset directory")->required();
    train_cmd->add_option("--out", train_args.out, "Directory for checkpoints and loss_log.json")->required();
    train_cmd->add_option("--epochs", train_args.epochs, "Epoch count")->check(CLI::PositiveNumber);
    train_cmd->add_option("--save-every", train_args.save_every, "Also checkpoint every N epochs");
    train_cmd->add_flag("--surface-only", train_args.surface_only, "Drop the relation loss");

    EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Print accuracy and relation AP of a checkpoint as JSON");
    eval.config.add_to(eval_cmd);
    eval_cmd->add_option("--model", eval.model, "Checkpoint")->required();
    eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();

    ParseArgs parse;
    CLI::App* parse_cmd = app.add_subcommand("parse", "Label one PPM image and predict region relations");
    parse.config.add_to(parse_cmd);
    parse_cmd->add_option("--model", parse.model, "Checkpoint")->required();
    parse_cmd->add_option("--image", parse.image, "Input PPM")->required();
    parse_cmd->add_option("--out", parse.out, "Output directory")->required();
    parse_cmd->add_option("--name", parse.name, "Output file stem (default: image stem)");

    ReconstructArgs rec;
    CLI::App* rec_cmd = app.add_subcommand("reconstruct", "Export a pop-up OBJ model");
    rec.config.add_to(rec_cmd);
    rec_cmd->add_option("--model", rec.model, "Checkpoint, used with --image");
    rec_cmd->add_option("--image", rec.image, "Input PPM");
    rec_cmd->add_option("--data", rec.data, "Dataset directory, used with --stem for ground truth");
    rec_cmd->add_option("--stem", rec.stem, "Example stem such as scene_0000");
    rec_cmd->add_option("--out", rec.out, "Output directory")->required();
    rec_cmd->add_option("--name", rec.name, "Output file stem");
    rec_cmd->add_option("--layer", rec.layer, "MS-LSTM layer whose regions and relations are used");
    rec_cmd->add_option("--camera-height", rec.height, "Camera height above the ground")->check(CLI::PositiveNumber);

    GradcheckArgs grad;
    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients against finite differences");
    grad_cmd->add_option("--d", grad.d, "Hidden width")->check(CLI::Range(1, 16));
    grad_cmd->add_option("--size", grad.size, "Image width and height")->check(CLI::Range(4, 16));
    grad_cmd->add_option("--seed", grad.seed, "RNG seed");
    grad_cmd->add_option("--mode", grad.mode, "Hidden state mode")->check(CLI::IsMember({"current", "previous", "both"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*synth_cmd) return run_synth(synth);
        if (*train_cmd) return run_train(train_args);
        if (*eval_cmd) return run_eval(eval);
        if (*parse_cmd) return run_parse(parse);
        if (*rec_cmd) return run_reconstruct(rec);
        if (*grad_cmd) return run_gradcheck(grad);
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const FileError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kMissingFile;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kBadConfig;
    } catch (const ShapeMismatchError& e) {
        std::fprintf(stderr, "shape mismatch: %s\n", e.what());
        return kShapeMismatch;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "malformed file: %s\n", e.what());
        return kBadData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    }
    return kUsage;
}
