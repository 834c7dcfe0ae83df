// SPDX-License-Identifier: Apache-2.0
/**
 * @file   dataio.hpp
 * @brief  Feature datasets: on-disk format, row normalization, synthetic
 *         generation and conversation-level splits.
 *
 * On disk a dataset is a JSON manifest plus one raw float64 little-endian
 * row-major blob per (conversation, modality):
 *
 *   {"version": 1,
 *    "dims": {"text": 32, "audio": 32, "visual": 32},
 *    "classes": ["c0", ...],
 *    "conversations": [{"id": "conv_0000", "n_utterances": 7,
 *                       "labels": [0, 3, ...],
 *                       "blobs": {"text": "blobs/conv_0000.text.f64", ...}}]}
 *
 * Blob paths are relative to the manifest's directory.
 */
#pragma once

#include <synctva/matrix.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace synctva {

enum class Modality { Text, Audio, Visual };
inline constexpr std::array<Modality, 3> kModalities = {Modality::Text, Modality::Audio,
                                                        Modality::Visual};
const char *modality_name(Modality m);

struct ModalityDims {
  std::size_t text = 32;
  std::size_t audio = 32;
  std::size_t visual = 32;

  std::size_t of(Modality m) const;
  friend bool operator==(const ModalityDims &, const ModalityDims &) = default;
};

struct Conversation {
  std::string id;
  Matrix text;
  Matrix audio;
  Matrix visual;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  const Matrix &features(Modality m) const;
  Matrix &features(Modality m);

  friend bool operator==(const Conversation &, const Conversation &) = default;
};

struct FeatureSet {
  std::vector<Conversation> conversations;
  ModalityDims dims;
  std::vector<std::string> class_names;

  std::size_t class_count() const { return class_names.size(); }
  std::size_t utterance_count() const;
  /// Throws DataError when any structural invariant is broken.
  void validate() const;

  friend bool operator==(const FeatureSet &, const FeatureSet &) = default;
};

/// Divides every nonzero row by its Euclidean norm. All-zero rows and rows
/// already within 1e-12 of unit norm are returned untouched, which makes the
/// operation idempotent bit for bit.
Matrix l2_normalize_rows(Matrix m);

/// Loads a manifest (file path, or a directory containing manifest.json),
/// validates it and row-normalizes every feature matrix.
FeatureSet load_featureset(const std::filesystem::path &manifest);

/// Writes `dir/manifest.json` and `dir/blobs/*.f64`. Returns the manifest path.
std::filesystem::path save_featureset(const FeatureSet &fs, const std::filesystem::path &dir);

/// SHA-256 (hex) over the manifest bytes followed by every referenced blob in
/// manifest order.
std::string dataset_fingerprint(const std::filesystem::path &manifest);

struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t conversations = 60;
  std::size_t min_utterances = 4;
  std::size_t max_utterances = 12;
  ModalityDims dims;
  std::size_t classes = 6;
  double cluster_spread = 0.05;
};

/// Gaussian class clusters, one center per (class, modality). Labels follow
/// shuffled round-robin blocks of size C across the whole dataset.
FeatureSet synth_dataset(const SynthOptions &opts);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  FeatureSet train;
  FeatureSet valid;
  FeatureSet test;
};

/// Conversation-level partition; each part keeps the dataset's original order.
/// Every part must end up non-empty.
DatasetSplit split(const FeatureSet &fs, const SplitRatios &ratios, std::uint64_t seed);

// Raw float64 little-endian blob helpers, shared with checkpoints.
void write_f64_blob(const std::filesystem::path &path, std::span<const double> values);
std::vector<double> read_f64_blob(const std::filesystem::path &path, std::size_t expected);

} // namespace synctva
