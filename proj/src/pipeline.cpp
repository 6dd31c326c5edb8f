#include "rcodean/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "rcodean/rng.hpp"

namespace rcodean {

namespace {

constexpr std::size_t kEvalChunk = 256;
constexpr double kScoreClip = 1e-6;

// Runs fn(0..count-1) on up to `jobs` threads and rethrows the first failure
// in index order.
template <typename Fn>
void run_indexed(std::size_t count, std::size_t jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) guarded(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Mat column_range(const Mat& m, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return m.gather_cols(idx);
}

Mat encode_all(const RCodeanNet& net, const Mat& data) {
  if (data.cols() <= kEvalChunk) return encode(net, data);
  Mat codes(net.hidden_dim(), data.cols());
  for (std::size_t b = 0; b < data.cols(); b += kEvalChunk) {
    const std::size_t e = std::min(data.cols(), b + kEvalChunk);
    const Mat part = encode(net, column_range(data, b, e));
    for (std::size_t j = b; j < e; ++j)
      for (std::size_t r = 0; r < part.rows(); ++r) codes(r, j) = part(r, j - b);
  }
  return codes;
}

double logit(double p) {
  p = std::clamp(p, kScoreClip, 1.0 - kScoreClip);
  return std::log(p / (1.0 - p));
}

double percent(std::size_t hits, std::size_t n) {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

Mat preprocess(const Mat& image) {
  const std::size_t h = image.rows();
  const std::size_t w = image.cols();
  if (h < kMinImageSide || w < kMinImageSide) {
    throw InputError("preprocess: image " + image.shape_str() + " is smaller than 8x8");
  }
  const double sy = static_cast<double>(h) / kImageSide;
  const double sx = static_cast<double>(w) / kImageSide;
  Mat out(kImageSide, kImageSide);
  for (std::size_t i = 0; i < kImageSide; ++i) {
    const double fy = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t j = 0; j < kImageSide; ++j) {
      const double fx = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1.0 - wx) * image(y0, x0) + wx * image(y0, x1);
      const double bottom = (1.0 - wx) * image(y1, x0) + wx * image(y1, x1);
      out(i, j) = ((1.0 - wy) * top + wy * bottom) / 255.0;
    }
  }
  return out;
}

PatchOffset patch_offset(std::size_t patch) {
  if (patch >= kNumPatches) throw std::out_of_range("patch index " + std::to_string(patch));
  return {(patch / 3) * kPatchStride, (patch % 3) * kPatchStride};
}

std::size_t source_dim(std::size_t source) {
  if (source >= kNumSources) throw std::out_of_range("source index " + std::to_string(source));
  return source == kFullFaceSource ? kImageSide * kImageSide : kPatchSide * kPatchSide;
}

std::string source_name(std::size_t source) {
  if (source >= kNumSources) throw std::out_of_range("source index " + std::to_string(source));
  return source == kFullFaceSource ? "full" : "patch" + std::to_string(source + 1);
}

PatchGrid tessellate(const Mat& image) {
  if (image.rows() != kImageSide || image.cols() != kImageSide) {
    throw ShapeError("tessellate: expected a 64x64 image, got " + image.shape_str());
  }
  PatchGrid grid;
  for (std::size_t p = 0; p < kNumPatches; ++p) {
    const PatchOffset off = patch_offset(p);
    Mat v(kPatchSide * kPatchSide, 1);
    for (std::size_t r = 0; r < kPatchSide; ++r)
      for (std::size_t c = 0; c < kPatchSide; ++c)
        v[r * kPatchSide + c] = image(off.row + r, off.col + c);
    grid.sources[p] = std::move(v);
  }
  grid.sources[kFullFaceSource] = Mat(kImageSide * kImageSide, 1,
                                      std::vector<double>(image.values().begin(), image.values().end()));
  return grid;
}

SourceBatch build_sources(const std::vector<Mat>& images) {
  SourceBatch batch;
  for (std::size_t s = 0; s < kNumSources; ++s) batch[s] = Mat(source_dim(s), images.size());
  for (std::size_t j = 0; j < images.size(); ++j) {
    const PatchGrid grid = tessellate(images[j]);
    for (std::size_t s = 0; s < kNumSources; ++s) batch[s].set_col(j, grid.sources[s]);
  }
  return batch;
}

SourceBatch dataset_sources(const AttributeDataset& dataset, const std::vector<std::size_t>& indices) {
  std::vector<Mat> images;
  images.reserve(indices.size());
  for (std::size_t i : indices) images.push_back(preprocess(dataset.image(i)));
  return build_sources(images);
}

CodeanLoss evaluate_autoencoder(const RCodeanNet& net, const Mat& data) {
  CodeanLoss sum;
  const double n = static_cast<double>(data.cols());
  for (std::size_t b = 0; b < data.cols(); b += kEvalChunk) {
    const std::size_t e = std::min(data.cols(), b + kEvalChunk);
    const Mat x = column_range(data, b, e);
    const CodeanLoss part = codean_loss(net, x, net_forward(net, x).reconstruction);
    const double w = static_cast<double>(e - b) / n;
    sum.euc += part.euc * w;
    sum.cos += part.cos * w;
    sum.degenerate = sum.degenerate || part.degenerate;
  }
  sum.reg = encoder_l1(net);
  const CodeanParams& p = net.params;
  sum.total = p.alpha * sum.euc + p.beta * sum.cos + p.lambda * sum.reg;
  return sum;
}

AutoencoderRun train_autoencoder(const Mat& data, const AutoencoderConfig& config,
                                 std::uint64_t seed, std::size_t source) {
  if (data.cols() == 0) throw ConfigError("train_autoencoder: no training samples");
  if (config.batch_size == 0) throw ConfigError("train_autoencoder: batch size must be positive");
  Rng rng(seed);
  AutoencoderRun run;
  run.net = RCodeanNet::create(data.rows(), config.hidden_dim, config.codean, default_skips(), rng);
  Adam adam(AdamConfig{.lr = config.lr});
  PlateauScheduler scheduler(config.lr, config.plateau);
  const auto names = run.net.parameter_names();

  run.initial = evaluate_autoencoder(run.net, data);
  run.epochs.push_back({source, 0, run.initial, adam.lr()});

  std::vector<std::size_t> order(data.cols());
  std::iota(order.begin(), order.end(), 0);
  const double n = static_cast<double>(order.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    CodeanLoss mean;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Mat xb = data.gather_cols(std::span<const std::size_t>(order.data() + start, end - start));
      const ForwardResult fwd = net_forward(run.net, xb);
      const CodeanLoss loss = codean_loss(run.net, xb, fwd.reconstruction);
      const NetGrads grads = net_backward(run.net, xb, fwd);
      auto params = run.net.parameters();
      std::vector<ParamRef> refs;
      refs.reserve(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) refs.push_back({names[i], params[i], &grads.values[i]});
      adam.step(refs);

      const double w = static_cast<double>(end - start) / n;
      mean.total += loss.total * w;
      mean.euc += loss.euc * w;
      mean.cos += loss.cos * w;
      mean.reg += loss.reg * w;
      mean.degenerate = mean.degenerate || loss.degenerate;
    }
    run.epochs.push_back({source, epoch, mean, adam.lr()});
    spdlog::debug("source {} epoch {}: total {:.6f} euc {:.6f} cos {:.6f} lr {:g}", source, epoch,
                  mean.total, mean.euc, mean.cos, adam.lr());
    adam.set_lr(scheduler.update(mean.total));
  }
  run.final = evaluate_autoencoder(run.net, data);
  return run;
}

Stage1Result train_stage1(const SourceBatch& sources, const Mat& labels, const PipelineConfig& config) {
  for (std::size_t s = 0; s < kNumSources; ++s) {
    if (sources[s].cols() == 0) throw ConfigError("train_stage1: empty training split");
    if (sources[s].cols() != labels.cols()) {
      throw ShapeError("train_stage1: source " + source_name(s) + " has " +
                       std::to_string(sources[s].cols()) + " samples but labels have " +
                       std::to_string(labels.cols()));
    }
  }
  Stage1Result result;
  std::array<std::vector<EpochRecord>, kNumSources> logs;
  std::array<std::vector<std::string>, kNumSources> warnings;
  run_indexed(kNumSources, config.jobs, [&](std::size_t s) {
    AutoencoderRun run =
        train_autoencoder(sources[s], config.autoencoder, derive_seed(config.seed, s), s);
    spdlog::info("source {}: reconstruction {:.4f} -> {:.4f}", source_name(s), run.initial.euc,
                 run.final.euc);
    const Mat codes = encode_all(run.net, sources[s]);
    HeadTrainConfig head_cfg = config.head;
    head_cfg.seed = derive_seed(config.seed, 100 + s);
    HeadTrainResult head = head_train(codes, labels, head_cfg);
    for (auto& w : head.warnings) warnings[s].push_back(source_name(s) + ": " + w);
    result.models[s] = Stage1Model{std::move(run.net), std::move(head.head)};
    result.initial[s] = run.initial;
    result.final[s] = run.final;
    logs[s] = std::move(run.epochs);
  });
  for (std::size_t s = 0; s < kNumSources; ++s) {
    result.log.insert(result.log.end(), logs[s].begin(), logs[s].end());
    result.warnings.insert(result.warnings.end(), warnings[s].begin(), warnings[s].end());
  }
  return result;
}

std::vector<Mat> score_batch(const Stage1Models& models, const SourceBatch& sources) {
  const std::size_t n = sources[0].cols();
  std::size_t k = 0;
  for (std::size_t s = 0; s < kNumSources; ++s) {
    if (!models[s].trained()) throw UsageError("score: stage-1 model " + source_name(s) + " is untrained");
    if (s == 0) k = models[s].head.output_dim();
    if (models[s].head.output_dim() != k) throw ConfigError("score: heads disagree on attribute count");
    if (sources[s].cols() != n) throw ShapeError("score: sources have different sample counts");
  }
  std::vector<Mat> scores(n, Mat(kNumSources, k));
  for (std::size_t s = 0; s < kNumSources; ++s) {
    for (std::size_t b = 0; b < n; b += kEvalChunk) {
      const std::size_t e = std::min(n, b + kEvalChunk);
      const Mat x = n <= kEvalChunk ? sources[s] : column_range(sources[s], b, e);
      const Mat probs = head_score(models[s].head, encode(models[s].net, x));
      for (std::size_t j = b; j < e; ++j)
        for (std::size_t a = 0; a < k; ++a) scores[j](s, a) = probs(a, j - b);
    }
  }
  return scores;
}

Mat score_sample(const Stage1Models& models, const Mat& raw_image) {
  return score_batch(models, build_sources({preprocess(raw_image)})).front();
}

PatchWeightResult learn_patch_weights(const std::vector<Mat>& scores, const Mat& labels,
                                      const PatchWeightConfig& config) {
  if (scores.empty()) throw ConfigError("learn_patch_weights: no score matrices");
  const std::size_t k = scores.front().cols();
  const std::size_t n = scores.size();
  if (labels.rows() != k || labels.cols() != n) {
    throw ShapeError("learn_patch_weights: labels " + labels.shape_str() + " for " +
                     std::to_string(n) + " samples of " + std::to_string(k) + " attributes");
  }
  for (const Mat& s : scores) {
    if (s.rows() != kNumSources || s.cols() != k) {
      throw ShapeError("learn_patch_weights: score matrix " + s.shape_str() + " is not 10x" +
                       std::to_string(k));
    }
  }
  check_binary_labels(labels, "learn_patch_weights");

  PatchWeightResult result;
  result.weights = Mat(k, kNumSources, 1.0);
  for (std::size_t a = 0; a < k; ++a) {
    double pos = 0.0;
    for (std::size_t j = 0; j < n; ++j) pos += labels(a, j);
    if (pos == 0.0 || pos == static_cast<double>(n)) {
      result.warnings.push_back("attribute " + std::to_string(a) +
                                " has a single class; using uniform patch weights");
      spdlog::warn("learn_patch_weights: {}", result.warnings.back());
      continue;
    }
    Mat logits(kNumSources, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < kNumSources; ++p) logits(p, j) = logit(scores[j](p, a));

    // u holds the square roots of the weights. Plain gradient descent: sources
    // that carry no signal get almost no gradient and stay near their start.
    std::vector<double> u(kNumSources, std::sqrt(1.0 / kNumSources));
    double bias = 0.0;
    std::vector<double> grad_u(kNumSources);
    for (std::size_t it = 0; it < config.iterations; ++it) {
      std::fill(grad_u.begin(), grad_u.end(), 0.0);
      double grad_b = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double z = bias;
        for (std::size_t p = 0; p < kNumSources; ++p) z += u[p] * u[p] * logits(p, j);
        const double r = (sigmoid(z) - labels(a, j)) / static_cast<double>(n);
        for (std::size_t p = 0; p < kNumSources; ++p) grad_u[p] += r * 2.0 * u[p] * logits(p, j);
        grad_b += r;
      }
      for (std::size_t p = 0; p < kNumSources; ++p) u[p] -= config.lr * grad_u[p];
      bias -= config.lr * grad_b;
    }
    double max_w = 0.0;
    for (std::size_t p = 0; p < kNumSources; ++p) max_w = std::max(max_w, u[p] * u[p]);
    for (std::size_t p = 0; p < kNumSources; ++p) {
      result.weights(a, p) = max_w > 0.0 ? u[p] * u[p] / max_w : 1.0;
    }
  }
  return result;
}

Mat build_stage2_features(const Mat& scores, const Mat& weights) {
  const std::size_t k = scores.cols();
  if (scores.rows() != kNumSources || weights.rows() != k || weights.cols() != kNumSources) {
    throw ShapeError("build_stage2_features: scores " + scores.shape_str() + " vs weights " +
                     weights.shape_str());
  }
  Mat out(kNumSources * k, 1);
  for (std::size_t p = 0; p < kNumSources; ++p)
    for (std::size_t a = 0; a < k; ++a) out[p * k + a] = weights(a, p) * scores(p, a);
  return out;
}

Mat stage2_feature_matrix(const std::vector<Mat>& scores, const Mat& weights) {
  Mat out(kNumSources * weights.rows(), scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) out.set_col(j, build_stage2_features(scores[j], weights));
  return out;
}

Stage2 train_stage2(const Mat& features, const Mat& labels, const PipelineConfig& config) {
  Stage2 s2;
  HeadTrainConfig mlp_cfg = config.stage2_mlp;
  mlp_cfg.seed = derive_seed(config.seed, 200);
  s2.mlp = head_train(features, labels, mlp_cfg).head;
  ForestConfig forest_cfg = config.forest;
  forest_cfg.seed = derive_seed(config.seed, 201);
  s2.forest = forest_train(features, labels, forest_cfg);
  SvmConfig svm_cfg = config.svm;
  svm_cfg.seed = derive_seed(config.seed, 202);
  s2.svm = svm_train(features, labels, svm_cfg);
  return s2;
}

void AttributeModel::check_ready() const {
  const std::size_t k = num_attributes();
  if (k == 0) throw UsageError("model has no attributes");
  for (std::size_t s = 0; s < kNumSources; ++s) {
    if (!stage1[s].trained()) throw UsageError("stage-1 model " + source_name(s) + " is untrained");
    if (stage1[s].net.input_dim() != source_dim(s)) {
      throw ConfigError("stage-1 model " + source_name(s) + " has input dimension " +
                        std::to_string(stage1[s].net.input_dim()));
    }
    if (stage1[s].head.output_dim() != k) {
      throw ConfigError("stage-1 head " + source_name(s) + " does not produce " + std::to_string(k) +
                        " attributes");
    }
  }
  if (patch_weights.rows() != k || patch_weights.cols() != kNumSources) {
    throw UsageError("patch weights are missing or have shape " + patch_weights.shape_str());
  }
  if (stage2.mlp.empty() || stage2.forest.empty() || stage2.svm.empty()) {
    throw UsageError("stage-2 ensemble is untrained");
  }
  const std::size_t f = kNumSources * k;
  if (stage2.mlp.input_dim() != f || stage2.mlp.output_dim() != k || stage2.forest.num_features != f ||
      stage2.forest.num_attributes() != k || stage2.svm.num_features() != f ||
      stage2.svm.num_attributes() != k) {
    throw ConfigError("stage-2 classifiers do not match " + std::to_string(k) + " attributes");
  }
}

std::vector<Prediction> predict_sources(const AttributeModel& model, const SourceBatch& sources) {
  model.check_ready();
  const std::size_t k = model.num_attributes();
  std::vector<Mat> scores = score_batch(model.stage1, sources);
  const Mat features = stage2_feature_matrix(scores, model.patch_weights);
  const Mat mlp_p = head_score(model.stage2.mlp, features);
  const Mat forest_p = model.stage2.forest.predict_proba(features);
  const Mat margins = model.stage2.svm.margins(features);

  std::vector<Prediction> out(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    Prediction& p = out[j];
    p.mlp.resize(k);
    p.forest.resize(k);
    p.svm.resize(k);
    p.confidence.resize(k);
    for (std::size_t a = 0; a < k; ++a) {
      p.mlp[a] = mlp_p(a, j) > kDecisionThreshold ? 1 : 0;
      p.forest[a] = forest_p(a, j) > kDecisionThreshold ? 1 : 0;
      p.svm[a] = margins(a, j) > 0.0 ? 1 : 0;
      p.confidence[a] = (mlp_p(a, j) + forest_p(a, j) + sigmoid(margins(a, j))) / 3.0;
    }
    p.bits = ensemble_vote(p.mlp, p.forest, p.svm);
    p.scores = std::move(scores[j]);
  }
  return out;
}

Prediction predict(const AttributeModel& model, const Mat& raw_image) {
  return std::move(predict_sources(model, build_sources({preprocess(raw_image)})).front());
}

std::vector<Prediction> predict_images(const AttributeModel& model, const std::vector<Mat>& raw_images) {
  std::vector<Mat> images;
  images.reserve(raw_images.size());
  for (const Mat& m : raw_images) images.push_back(preprocess(m));
  return predict_sources(model, build_sources(images));
}

TrainedPipeline train_pipeline(const AttributeDataset& dataset, const PipelineConfig& config) {
  dataset.validate();
  const std::vector<std::size_t> ae_idx = dataset.indices(Split::ae_train);
  const std::vector<std::size_t> clf_idx = dataset.indices(Split::clf_train);
  if (ae_idx.empty()) throw ConfigError("autoencoder training split is empty");
  if (clf_idx.empty()) throw ConfigError("classifier training split is empty");

  TrainedPipeline out;
  out.model.config = config;
  out.model.attribute_names = dataset.attribute_names;

  {
    const SourceBatch ae_sources = dataset_sources(dataset, ae_idx);
    Stage1Result s1 = train_stage1(ae_sources, dataset.labels(ae_idx), config);
    out.model.stage1 = std::move(s1.models);
    out.autoencoder_log = std::move(s1.log);
    out.initial = s1.initial;
    out.final = s1.final;
    out.warnings = std::move(s1.warnings);
  }

  const Mat clf_labels = dataset.labels(clf_idx);
  const std::vector<Mat> clf_scores = score_batch(out.model.stage1, dataset_sources(dataset, clf_idx));
  PatchWeightResult pw = learn_patch_weights(clf_scores, clf_labels, config.patch_weights);
  out.model.patch_weights = std::move(pw.weights);
  out.warnings.insert(out.warnings.end(), pw.warnings.begin(), pw.warnings.end());

  const Mat features = stage2_feature_matrix(clf_scores, out.model.patch_weights);
  out.model.stage2 = train_stage2(features, clf_labels, config);
  return out;
}

double EvalReport::mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

EvalReport evaluate(const AttributeModel& model, const AttributeDataset& dataset, Split split) {
  if (dataset.num_attributes() != model.num_attributes()) {
    throw ConfigError("model predicts " + std::to_string(model.num_attributes()) +
                      " attributes but the dataset has " + std::to_string(dataset.num_attributes()));
  }
  const std::vector<std::size_t> idx = dataset.indices(split);
  if (idx.empty()) throw ConfigError("split " + to_string(split) + " is empty");
  const std::size_t k = model.num_attributes();

  std::vector<std::size_t> hits(k), mlp(k), forest(k), svm(k), positives(k);
  for (std::size_t b = 0; b < idx.size(); b += kEvalChunk) {
    const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(b),
                                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), b + kEvalChunk)));
    const auto preds = predict_sources(model, dataset_sources(dataset, chunk));
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      const Bits& truth = dataset.records[chunk[j]].labels;
      for (std::size_t a = 0; a < k; ++a) {
        hits[a] += preds[j].bits[a] == truth[a];
        mlp[a] += preds[j].mlp[a] == truth[a];
        forest[a] += preds[j].forest[a] == truth[a];
        svm[a] += preds[j].svm[a] == truth[a];
        positives[a] += truth[a];
      }
    }
  }
  EvalReport report;
  report.attribute_names = model.attribute_names;
  report.samples = idx.size();
  for (std::size_t a = 0; a < k; ++a) {
    report.ensemble.push_back(percent(hits[a], idx.size()));
    report.mlp.push_back(percent(mlp[a], idx.size()));
    report.forest.push_back(percent(forest[a], idx.size()));
    report.svm.push_back(percent(svm[a], idx.size()));
    report.majority.push_back(percent(std::max(positives[a], idx.size() - positives[a]), idx.size()));
  }
  return report;
}

}  // namespace rcodean
