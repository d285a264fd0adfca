#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace hlstm {

/// Which memory the LSTM output gate reads. kCurrent is the conventional
/// h = tanh(o * m_next); kPrevious reads the incoming memory, h = tanh(o * m).
enum class HiddenFrom { kCurrent, kPrevious };

/// How a superpixel scale is read: average pixels per region, or a target
/// region count.
enum class ScaleMeaning { kPixelsPerRegion, kRegionCount };

struct ModelConfig {
    std::size_t image_channels = 3;
    std::size_t d = 64;
    std::size_t neighbors = 8;
    std::size_t num_plstm_layers = 5;
    std::size_t num_mslstm_layers = 5;
    std::vector<double> scales{16, 32, 48, 64, 128};
    ScaleMeaning scale_means = ScaleMeaning::kPixelsPerRegion;
    double pi_smooth = 1.0;
    std::size_t num_classes = 3;
    std::vector<std::size_t> conv_channels{32, 32};
    /// Width of the hidden layer of each relation head; 0 makes the head a
    /// single linear map on [h_a, h_b].
    std::size_t relation_hidden = 128;
    HiddenFrom hidden_from_memory = HiddenFrom::kCurrent;

    double slic_compactness = 0.1;
    std::size_t slic_iterations = 10;

    double lr_lstm = 0.001;
    double lr_cnn = 0.0001;
    double momentum = 0.9;
    /// 0 means full batch.
    std::size_t batch_size = 4;
    /// Multiply both learning rates by lr_decay_gamma every lr_decay_step
    /// epochs; 0 disables decay.
    std::size_t lr_decay_step = 0;
    double lr_decay_gamma = 0.1;
    std::uint64_t seed = 1;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// 32x32 images, d = 8, two P-LSTM and two MS-LSTM layers, scales {16, 64}.
ModelConfig desk_preset();
/// d = 64, five plus five layers, scales {16, 32, 48, 64, 128}.
ModelConfig paper_preset();
/// Throws ConfigError for unknown names.
ModelConfig preset_by_name(const std::string& name);

std::string to_json_string(const ModelConfig& config, int indent = 2);
/// Missing keys keep the defaults of `base`. Throws ConfigError.
ModelConfig config_from_json_string(const std::string& text, const ModelConfig& base = ModelConfig{});
ModelConfig load_config(const std::string& path, const ModelConfig& base = ModelConfig{});

}  // namespace hlstm
