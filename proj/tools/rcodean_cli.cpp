#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rcodean/bundle.hpp"
#include "rcodean/config.hpp"
#include "rcodean/dataset.hpp"
#include "rcodean/gradcheck.hpp"
#include "rcodean/image_io.hpp"
#include "rcodean/pipeline.hpp"
#include "rcodean/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rcodean;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;

/// Flags shared by the commands that resolve a RunConfig.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;

  // dataset
  std::optional<std::string> attr_list;
  std::optional<std::string> images_dir;
  std::optional<std::string> identity_file;
  std::optional<std::size_t> synthetic_n;
  std::optional<std::size_t> synthetic_k;
  std::optional<std::uint64_t> synthetic_seed;

  // hyperparameters
  std::optional<std::size_t> hidden_dim;
  std::optional<double> alpha, beta, lambda, lr, min_lr;
  std::optional<std::size_t> epochs, batch_size, patience;
  std::optional<std::size_t> head_epochs, stage2_epochs, trees, max_depth, svm_epochs, pw_iterations;
  std::optional<double> svm_reg;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool hyperparameters) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Pipeline seed");
  cmd->add_option("--jobs", f.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--attr-list", f.attr_list, "CelebA-style attribute list");
  cmd->add_option("--images-dir", f.images_dir, "Directory holding the images");
  cmd->add_option("--identity-file", f.identity_file, "Identity file for identity-disjoint splits");
  cmd->add_option("--synthetic-n", f.synthetic_n, "Use a synthetic dataset of this many images");
  cmd->add_option("--synthetic-k", f.synthetic_k, "Synthetic attribute count (<= 8)");
  cmd->add_option("--synthetic-seed", f.synthetic_seed, "Synthetic generator seed");
  if (!hyperparameters) return;
  cmd->add_option("--hidden-dim", f.hidden_dim, "Autoencoder code size l");
  cmd->add_option("--alpha", f.alpha, "Euclidean weight");
  cmd->add_option("--beta", f.beta, "Cosine weight");
  cmd->add_option("--lambda", f.lambda, "Encoder L1 weight");
  cmd->add_option("--lr", f.lr, "Autoencoder learning rate");
  cmd->add_option("--min-lr", f.min_lr, "Learning-rate floor");
  cmd->add_option("--epochs", f.epochs, "Autoencoder epochs");
  cmd->add_option("--batch-size", f.batch_size, "Autoencoder batch size");
  cmd->add_option("--patience", f.patience, "Plateau patience in epochs");
  cmd->add_option("--head-epochs", f.head_epochs, "Stage-1 head epochs");
  cmd->add_option("--stage2-epochs", f.stage2_epochs, "Stage-2 MLP epochs");
  cmd->add_option("--trees", f.trees, "Forest trees per attribute");
  cmd->add_option("--max-depth", f.max_depth, "Forest maximum depth");
  cmd->add_option("--svm-epochs", f.svm_epochs, "SVM epochs");
  cmd->add_option("--svm-reg", f.svm_reg, "SVM regularization");
  cmd->add_option("--pw-iterations", f.pw_iterations, "Patch-weight fitting iterations");
}

template <typename T, typename U>
void apply(const std::optional<T>& flag, U& target) {
  if (flag) target = *flag;
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.out) c.out = *f.out;
  apply(f.seed, c.pipeline.seed);
  apply(f.jobs, c.pipeline.jobs);
  if (f.attr_list) {
    c.attr_list = *f.attr_list;
    c.synthetic.reset();
  }
  if (f.images_dir) c.images_dir = *f.images_dir;
  if (f.identity_file) c.identity_file = *f.identity_file;
  if (f.synthetic_n || f.synthetic_k || f.synthetic_seed) {
    SyntheticSpec spec = c.synthetic.value_or(SyntheticSpec{});
    apply(f.synthetic_n, spec.n);
    apply(f.synthetic_k, spec.k);
    apply(f.synthetic_seed, spec.seed);
    c.synthetic = spec;
  }
  PipelineConfig& p = c.pipeline;
  apply(f.hidden_dim, p.autoencoder.hidden_dim);
  apply(f.alpha, p.autoencoder.codean.alpha);
  apply(f.beta, p.autoencoder.codean.beta);
  apply(f.lambda, p.autoencoder.codean.lambda);
  apply(f.lr, p.autoencoder.lr);
  apply(f.min_lr, p.autoencoder.plateau.min_lr);
  apply(f.epochs, p.autoencoder.epochs);
  apply(f.batch_size, p.autoencoder.batch_size);
  apply(f.patience, p.autoencoder.plateau.patience);
  apply(f.head_epochs, p.head.epochs);
  apply(f.stage2_epochs, p.stage2_mlp.epochs);
  apply(f.trees, p.forest.trees_per_attr);
  apply(f.max_depth, p.forest.max_depth);
  apply(f.svm_epochs, p.svm.epochs);
  apply(f.svm_reg, p.svm.reg);
  apply(f.pw_iterations, p.patch_weights.iterations);
  // Round-trip through JSON so overrides get the same validation as files.
  return json(c).get<RunConfig>();
}

void prepare_out(const RunConfig& c) {
  fs::create_directories(c.out);
  write_run_config(c, c.out / "resolved_config.json");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

fs::path bundle_path(const std::string& flag, const RunConfig& c) {
  return flag.empty() ? c.out / "model.bundle" : fs::path(flag);
}

int cmd_gen_synth(const CommonFlags& f) {
  RunConfig c = resolve(f);
  if (!c.synthetic) c.synthetic = SyntheticSpec{};
  const SyntheticSpec spec = *c.synthetic;
  const AttributeDataset ds = gen_synthetic(spec.n, spec.k, spec.seed, c.splits);
  const fs::path images = c.out / "images";
  fs::create_directories(images);
  for (std::size_t i = 0; i < ds.size(); ++i) save_pgm(ds.images[i], images / ds.records[i].image);
  write_attr_list(ds, c.out / "list_attr.txt");
  // The echoed config points at the files just written.
  c.synthetic.reset();
  c.attr_list = c.out / "list_attr.txt";
  c.images_dir = images;
  prepare_out(c);
  std::cout << "wrote " << ds.size() << " images with " << ds.num_attributes() << " attributes to "
            << c.out.string() << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& f) {
  const RunConfig c = resolve(f);
  prepare_out(c);
  const AttributeDataset ds = load_dataset(c);
  spdlog::info("training on {} records ({} attributes)", ds.size(), ds.num_attributes());
  const TrainedPipeline run = train_pipeline(ds, c.pipeline);

  std::ofstream loss = open_out(c.out / "loss.csv");
  loss << "source,epoch,total,euc,cos,reg,lr\n";
  for (const EpochRecord& r : run.autoencoder_log) {
    loss << source_name(r.source) << ',' << r.epoch << ',' << fmt17(r.loss.total) << ','
         << fmt17(r.loss.euc) << ',' << fmt17(r.loss.cos) << ',' << fmt17(r.loss.reg) << ','
         << fmt17(r.lr) << '\n';
  }
  save_bundle(run.model, c.out / "model.bundle");
  for (const std::string& w : run.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "bundle written to " << (c.out / "model.bundle").string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonFlags& f, const std::string& bundle_flag, const std::string& split_name) {
  const RunConfig c = resolve(f);
  const Split split = split_from_string(split_name);
  prepare_out(c);
  const AttributeDataset ds = load_dataset(c);
  const AttributeModel model = load_bundle(bundle_path(bundle_flag, c), ds.num_attributes());
  const EvalReport rep = evaluate(model, ds, split);

  std::ofstream acc = open_out(c.out / "accuracy.csv");
  acc << "attribute,accuracy\n";
  for (std::size_t a = 0; a < rep.attribute_names.size(); ++a) {
    acc << rep.attribute_names[a] << ',' << fmt2(rep.ensemble[a]) << '\n';
  }
  acc << "mean," << fmt2(EvalReport::mean(rep.ensemble)) << '\n';

  std::ofstream abl = open_out(c.out / "ablation.csv");
  abl << "classifier,mean_accuracy\n";
  abl << "mlp," << fmt2(EvalReport::mean(rep.mlp)) << '\n';
  abl << "forest," << fmt2(EvalReport::mean(rep.forest)) << '\n';
  abl << "svm," << fmt2(EvalReport::mean(rep.svm)) << '\n';
  abl << "ensemble," << fmt2(EvalReport::mean(rep.ensemble)) << '\n';
  abl << "majority_baseline," << fmt2(EvalReport::mean(rep.majority)) << '\n';

  std::cout << "split " << to_string(split) << ": " << rep.samples << " images, mean accuracy "
            << fmt2(EvalReport::mean(rep.ensemble)) << "% (majority baseline "
            << fmt2(EvalReport::mean(rep.majority)) << "%)\n";
  return kExitOk;
}

int cmd_predict(const CommonFlags& f, const std::string& bundle_flag, const std::vector<std::string>& images) {
  const RunConfig c = resolve(f);
  if (images.empty()) throw UsageError("predict needs at least one image path");
  prepare_out(c);
  const AttributeModel model = load_bundle(bundle_path(bundle_flag, c));
  std::vector<Mat> raw;
  raw.reserve(images.size());
  for (const std::string& p : images) raw.push_back(load_gray_image(p));
  const std::vector<Prediction> preds = predict_images(model, raw);

  std::ofstream csv = open_out(c.out / "predictions.csv");
  std::string header = "image";
  for (const std::string& n : model.attribute_names) header += "," + n;
  for (const std::string& n : model.attribute_names) header += "," + n + "_confidence";
  csv << header << '\n';
  std::cout << header << '\n';
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::string line = images[i];
    for (auto b : preds[i].bits) line += b ? ",1" : ",0";
    for (double p : preds[i].confidence) line += "," + fmt17(p);
    csv << line << '\n';
    std::cout << line << '\n';
  }
  return kExitOk;
}

int cmd_report_weights(const CommonFlags& f, const std::string& bundle_flag) {
  const RunConfig c = resolve(f);
  prepare_out(c);
  const AttributeModel model = load_bundle(bundle_path(bundle_flag, c));
  const Mat& w = model.patch_weights;
  if (w.empty() || w.cols() != kNumSources) throw UsageError("bundle has no trained patch weights");

  std::ofstream csv = open_out(c.out / "patch_weights.csv");
  std::string header = "attribute";
  for (std::size_t s = 0; s < kNumSources; ++s) header += "," + source_name(s);
  csv << header << '\n';
  std::cout << header << '\n';
  for (std::size_t a = 0; a < w.rows(); ++a) {
    std::string line = model.attribute_names[a];
    for (std::size_t s = 0; s < kNumSources; ++s) line += "," + fmt17(w(a, s));
    csv << line << '\n';
    std::cout << line << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(const CommonFlags& f, std::size_t trials, bool corrupt_cosine) {
  GradcheckConfig g;
  g.trials = trials;
  g.seed = f.seed.value_or(0);
  g.backward.drop_cosine_gradient = corrupt_cosine;
  if (f.out) {
    fs::create_directories(*f.out);
    std::ofstream echo = open_out(fs::path(*f.out) / "resolved_config.json");
    echo << json{{"gradcheck",
                  {{"trials", g.trials},
                   {"seed", g.seed},
                   {"input_dim", g.input_dim},
                   {"hidden_dim", g.hidden_dim},
                   {"batch", g.batch},
                   {"alpha", g.params.alpha},
                   {"beta", g.params.beta},
                   {"lambda", g.params.lambda},
                   {"step", g.step},
                   {"abs_tol", g.abs_tol},
                   {"rel_tol", g.rel_tol},
                   {"corrupt_cosine", corrupt_cosine}}}}
                .dump(2)
         << '\n';
  }
  const GradcheckReport rep = run_gradcheck(g);
  for (const GradcheckGroup& grp : rep.groups) {
    std::printf("%-40s worst_rel %.3e worst_abs %.3e %s\n", grp.name.c_str(), grp.worst_rel, grp.worst_abs,
                grp.passed ? "ok" : "FAIL");
  }
  std::printf("checked %zu entries over %zu nets, worst relative error %.3e\n", rep.checked, g.trials,
              rep.worst_rel());
  if (!rep.passed) {
    std::fprintf(stderr, "gradient check failed at %s\n", rep.first_failure.c_str());
    return kExitVerification;
  }
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("rcodean");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("RCODEAN_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("RCODEAN_LOG='{}' not recognized, using info", level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"R-Codean facial attribute pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string bundle;
  std::string split = "test";
  std::vector<std::string> images;
  std::size_t trials = 20;
  bool corrupt_cosine = false;

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic dataset as PGM files plus an attribute list");
  add_common(gen, flags, false);
  auto* train = app.add_subcommand("train", "Train the full pipeline and write a model bundle");
  add_common(train, flags, true);
  auto* eval = app.add_subcommand("eval", "Per-attribute accuracy of a bundle on a dataset split");
  add_common(eval, flags, false);
  eval->add_option("--bundle", bundle, "Model bundle (default <out>/model.bundle)");
  eval->add_option("--split", split, "ae-train, clf-train or test");
  auto* pred = app.add_subcommand("predict", "Predict attributes for grayscale images");
  add_common(pred, flags, false);
  pred->add_option("--bundle", bundle, "Model bundle (default <out>/model.bundle)");
  pred->add_option("images", images, "PGM or packed images")->required();
  auto* rep = app.add_subcommand("report-weights", "Write the k x 10 patch-weight table");
  add_common(rep, flags, false);
  rep->add_option("--bundle", bundle, "Model bundle (default <out>/model.bundle)");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the network gradients");
  grad->add_option("--seed", flags.seed, "Seed for the random networks");
  grad->add_option("--trials", trials, "Number of random networks");
  grad->add_option("--out", flags.out, "Directory for the echoed settings");
  grad->add_flag("--corrupt-cosine", corrupt_cosine, "Test hook: drop the cosine gradient term");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_synth(flags);
    if (*train) return cmd_train(flags);
    if (*eval) return cmd_eval(flags, bundle, split);
    if (*pred) return cmd_predict(flags, bundle, images);
    if (*rep) return cmd_report_weights(flags, bundle);
    if (*grad) return cmd_gradcheck(flags, trials, corrupt_cosine);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
