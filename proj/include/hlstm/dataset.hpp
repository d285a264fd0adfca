#pragma once

#include <string>
#include <vector>

#include "hlstm/config.hpp"
#include "hlstm/mslstm.hpp"
#include "hlstm/superpixel.hpp"
#include "hlstm/training.hpp"

namespace hlstm {

// A dataset directory holds dataset.json (example stems and the config used
// to segment them) and, per stem:
//   <stem>.ppm              image
//   <stem>_labels.pgm       surface labels
//   <stem>_relations.json   relation ground truth for every scale
//   <stem>_sp<k>.pgm/.json  superpixel map of layer k (16-bit ids) and its {scale, region_count}

void write_superpixel_map(const std::string& pgm_path, const std::string& json_path, const SuperpixelMap& map);
/// Throws FileError / FormatError.
SuperpixelMap read_superpixel_map(const std::string& pgm_path, const std::string& json_path);

std::string relations_to_json(const std::vector<RelationTruth>& truth, const std::vector<double>& scales);
/// Throws FormatError on malformed documents.
std::vector<RelationTruth> relations_from_json(const std::string& text, std::vector<double>* scales = nullptr);

/// Predicted distributions and argmax labels for every layer.
std::string predictions_to_json(const std::vector<RelationGraphPrediction>& predictions);

void write_example(const std::string& dir, const std::string& stem, const TrainingExample& example);
/// Reads one example; superpixel maps must exist for every configured scale.
TrainingExample read_example(const std::string& dir, const std::string& stem, const ModelConfig& config);

/// Creates `dir` if needed and writes every example plus dataset.json.
void write_dataset(const std::string& dir, const std::vector<TrainingExample>& examples, const ModelConfig& config);
/// Throws FileError if dataset.json is missing and FormatError when its
/// scales disagree with `config`.
std::vector<TrainingExample> read_dataset(const std::string& dir, const ModelConfig& config);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace hlstm
