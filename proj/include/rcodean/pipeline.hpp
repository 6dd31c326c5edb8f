#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rcodean/dataset.hpp"
#include "rcodean/ensemble.hpp"
#include "rcodean/errors.hpp"
#include "rcodean/forest.hpp"
#include "rcodean/mat.hpp"
#include "rcodean/mlp.hpp"
#include "rcodean/net.hpp"
#include "rcodean/optimizer.hpp"
#include "rcodean/svm.hpp"

namespace rcodean {

inline constexpr std::size_t kImageSide = 64;
inline constexpr std::size_t kPatchSide = 32;
inline constexpr std::size_t kPatchStride = 16;
inline constexpr std::size_t kNumPatches = 9;
/// Nine patches plus the full face.
inline constexpr std::size_t kNumSources = 10;
inline constexpr std::size_t kFullFaceSource = 9;
inline constexpr std::size_t kMinImageSide = 8;

/// Bilinear resample (pixel-center aligned, edge clamped) to 64x64 and
/// division by 255. Throws InputError for images smaller than 8x8.
Mat preprocess(const Mat& image);

/// Row/column offset of patch p (0-based, row-major over the 3x3 grid).
struct PatchOffset {
  std::size_t row;
  std::size_t col;
};
PatchOffset patch_offset(std::size_t patch);

/// Input dimension of a source: 1024 for patches, 4096 for the full face.
std::size_t source_dim(std::size_t source);
/// "patch1".."patch9", "full".
std::string source_name(std::size_t source);

/// The ten vectors extracted from one normalized image, each a flattened
/// row-major column.
struct PatchGrid {
  std::array<Mat, kNumSources> sources;
};

PatchGrid tessellate(const Mat& image);

/// Per-source data matrices (source_dim x N) for a list of normalized
/// 64x64 images.
using SourceBatch = std::array<Mat, kNumSources>;
SourceBatch build_sources(const std::vector<Mat>& images);
/// Loads, preprocesses and tessellates the given dataset records.
SourceBatch dataset_sources(const AttributeDataset& dataset, const std::vector<std::size_t>& indices);

struct AutoencoderConfig {
  std::size_t hidden_dim = 512;
  CodeanParams codean;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  PlateauScheduler::Config plateau;
};

struct PatchWeightConfig {
  std::size_t iterations = 500;
  double lr = 0.05;
};

struct PipelineConfig {
  AutoencoderConfig autoencoder;
  HeadTrainConfig head{.epochs = 60, .batch_size = 32, .lr = 1e-2, .seed = 0, .hidden = {}};
  PatchWeightConfig patch_weights;
  HeadTrainConfig stage2_mlp{.epochs = 100, .batch_size = 32, .lr = 1e-2, .seed = 0, .hidden = {}};
  ForestConfig forest;
  SvmConfig svm;
  std::uint64_t seed = 0;
  /// Worker threads for per-source training. Results do not depend on it.
  std::size_t jobs = 1;
};

struct EpochRecord {
  std::size_t source = 0;
  std::size_t epoch = 0;  // 0 is the evaluation before training
  CodeanLoss loss;
  double lr = 0.0;
};

struct AutoencoderRun {
  RCodeanNet net;
  std::vector<EpochRecord> epochs;
  CodeanLoss initial;  // full-data evaluation before training
  CodeanLoss final;    // full-data evaluation after training
};

/// Codean loss of the whole data set, evaluated in chunks.
CodeanLoss evaluate_autoencoder(const RCodeanNet& net, const Mat& data);

/// End-to-end Adam training of one R-Codean network on the columns of data,
/// with plateau decay on the epoch training loss.
AutoencoderRun train_autoencoder(const Mat& data, const AutoencoderConfig& config,
                                 std::uint64_t seed, std::size_t source = 0);

struct Stage1Model {
  RCodeanNet net;
  MlpHead head;

  bool trained() const { return !net.layers[0].weight.empty() && !head.empty(); }
};
using Stage1Models = std::array<Stage1Model, kNumSources>;

struct Stage1Result {
  Stage1Models models;
  std::vector<EpochRecord> log;  // ordered by source, then epoch
  std::array<CodeanLoss, kNumSources> initial;
  std::array<CodeanLoss, kNumSources> final;
  std::vector<std::string> warnings;
};

/// Trains, for each source, an R-Codean network on that source's vectors
/// and then an MLP head on the frozen codes. Sources train independently
/// with per-source seeds, so the result does not depend on config.jobs.
Stage1Result train_stage1(const SourceBatch& sources, const Mat& labels, const PipelineConfig& config);

/// 10 x k stage-1 probabilities for every column of the batch.
std::vector<Mat> score_batch(const Stage1Models& models, const SourceBatch& sources);
/// Preprocess, tessellate and score one raw image.
Mat score_sample(const Stage1Models& models, const Mat& raw_image);

struct PatchWeightResult {
  Mat weights;  // k x 10, rowwise max 1
  std::vector<std::string> warnings;
};

/// Per attribute, fits sigma(sum_p w_p^2 logit(s_p) + b) to the labels by
/// gradient descent on the mean cross-entropy and reports w^2 / max(w^2). Single-class
/// attributes get uniform weights and a warning.
PatchWeightResult learn_patch_weights(const std::vector<Mat>& scores, const Mat& labels,
                                      const PatchWeightConfig& config);

/// Entry p*k + a is weights(a, p) * scores(p, a). Returns a 10k x 1 column.
Mat build_stage2_features(const Mat& scores, const Mat& weights);
/// Column-stacked build_stage2_features over a batch.
Mat stage2_feature_matrix(const std::vector<Mat>& scores, const Mat& weights);

struct Stage2 {
  MlpHead mlp;
  Forest forest;
  LinearSvm svm;
};

Stage2 train_stage2(const Mat& features, const Mat& labels, const PipelineConfig& config);

/// Everything needed to go from a raw image to attribute decisions.
struct AttributeModel {
  PipelineConfig config;
  std::vector<std::string> attribute_names;
  Stage1Models stage1;
  Mat patch_weights;
  Stage2 stage2;

  std::size_t num_attributes() const { return attribute_names.size(); }
  /// Throws UsageError unless every component is present and consistent.
  void check_ready() const;
};

struct Prediction {
  Bits bits;                       // max-vote decision
  std::vector<double> confidence;  // mean of the three classifier probabilities
  Bits mlp;
  Bits forest;
  Bits svm;
  Mat scores;  // 10 x k stage-1 scores
};

std::vector<Prediction> predict_sources(const AttributeModel& model, const SourceBatch& sources);
Prediction predict(const AttributeModel& model, const Mat& raw_image);
std::vector<Prediction> predict_images(const AttributeModel& model, const std::vector<Mat>& raw_images);

struct TrainedPipeline {
  AttributeModel model;
  std::vector<EpochRecord> autoencoder_log;
  std::array<CodeanLoss, kNumSources> initial;
  std::array<CodeanLoss, kNumSources> final;
  std::vector<std::string> warnings;
};

/// Stage-1 models train on the ae-train split (autoencoders unsupervised,
/// heads on its labels); patch weights and the stage-2 ensemble train on
/// stage-1 scores of the clf-train split.
TrainedPipeline train_pipeline(const AttributeDataset& dataset, const PipelineConfig& config);

struct EvalReport {
  std::vector<std::string> attribute_names;
  std::size_t samples = 0;
  std::vector<double> ensemble;  // accuracy % per attribute
  std::vector<double> mlp;
  std::vector<double> forest;
  std::vector<double> svm;
  std::vector<double> majority;  // majority-class rate % on the evaluated split

  static double mean(const std::vector<double>& v);
};

EvalReport evaluate(const AttributeModel& model, const AttributeDataset& dataset, Split split);

}  // namespace rcodean
