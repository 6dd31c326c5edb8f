#include "rcodean/config.hpp"

#include <fstream>
#include <set>

#include "rcodean/synthetic.hpp"

namespace rcodean {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const char* section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError(std::string(section) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

json head_json(const HeadTrainConfig& h) {
  return {{"epochs", h.epochs}, {"batch_size", h.batch_size}, {"lr", h.lr}, {"hidden", h.hidden}};
}

void read_head(const json& j, const char* section, HeadTrainConfig& h) {
  reject_unknown(j, section, {"epochs", "batch_size", "lr", "hidden"});
  read(j, "epochs", h.epochs);
  read(j, "batch_size", h.batch_size);
  read(j, "lr", h.lr);
  read(j, "hidden", h.hidden);
}

}  // namespace

void to_json(json& j, const PipelineConfig& c) {
  const AutoencoderConfig& ae = c.autoencoder;
  j = json{
      {"autoencoder",
       {{"hidden_dim", ae.hidden_dim},
        {"alpha", ae.codean.alpha},
        {"beta", ae.codean.beta},
        {"lambda", ae.codean.lambda},
        {"epochs", ae.epochs},
        {"batch_size", ae.batch_size},
        {"lr", ae.lr},
        {"patience", ae.plateau.patience},
        {"decay_factor", ae.plateau.factor},
        {"threshold", ae.plateau.threshold},
        {"min_lr", ae.plateau.min_lr}}},
      {"head", head_json(c.head)},
      {"patch_weights", {{"iterations", c.patch_weights.iterations}, {"lr", c.patch_weights.lr}}},
      {"stage2_mlp", head_json(c.stage2_mlp)},
      {"forest", {{"trees_per_attr", c.forest.trees_per_attr}, {"max_depth", c.forest.max_depth}}},
      {"svm", {{"epochs", c.svm.epochs}, {"reg", c.svm.reg}}},
      {"seed", c.seed},
      {"jobs", c.jobs},
  };
}

void from_json(const json& j, PipelineConfig& c) {
  reject_unknown(j, "pipeline",
                 {"autoencoder", "head", "patch_weights", "stage2_mlp", "forest", "svm", "seed", "jobs"});
  if (auto it = j.find("autoencoder"); it != j.end()) {
    reject_unknown(*it, "autoencoder",
                   {"hidden_dim", "alpha", "beta", "lambda", "epochs", "batch_size", "lr", "patience",
                    "decay_factor", "threshold", "min_lr"});
    AutoencoderConfig& ae = c.autoencoder;
    read(*it, "hidden_dim", ae.hidden_dim);
    read(*it, "alpha", ae.codean.alpha);
    read(*it, "beta", ae.codean.beta);
    read(*it, "lambda", ae.codean.lambda);
    read(*it, "epochs", ae.epochs);
    read(*it, "batch_size", ae.batch_size);
    read(*it, "lr", ae.lr);
    read(*it, "patience", ae.plateau.patience);
    read(*it, "decay_factor", ae.plateau.factor);
    read(*it, "threshold", ae.plateau.threshold);
    read(*it, "min_lr", ae.plateau.min_lr);
  }
  if (auto it = j.find("head"); it != j.end()) read_head(*it, "head", c.head);
  if (auto it = j.find("stage2_mlp"); it != j.end()) read_head(*it, "stage2_mlp", c.stage2_mlp);
  if (auto it = j.find("patch_weights"); it != j.end()) {
    reject_unknown(*it, "patch_weights", {"iterations", "lr"});
    read(*it, "iterations", c.patch_weights.iterations);
    read(*it, "lr", c.patch_weights.lr);
  }
  if (auto it = j.find("forest"); it != j.end()) {
    reject_unknown(*it, "forest", {"trees_per_attr", "max_depth"});
    read(*it, "trees_per_attr", c.forest.trees_per_attr);
    read(*it, "max_depth", c.forest.max_depth);
  }
  if (auto it = j.find("svm"); it != j.end()) {
    reject_unknown(*it, "svm", {"epochs", "reg"});
    read(*it, "epochs", c.svm.epochs);
    read(*it, "reg", c.svm.reg);
  }
  read(j, "seed", c.seed);
  read(j, "jobs", c.jobs);
  c.autoencoder.codean.validate();
  if (c.autoencoder.hidden_dim == 0) throw ConfigError("autoencoder.hidden_dim must be positive");
}

void to_json(json& j, const RunConfig& c) {
  json dataset = {{"attr_list", c.attr_list.string()},
                  {"images_dir", c.images_dir.string()},
                  {"identity_file", c.identity_file.string()},
                  {"synthetic", nullptr}};
  if (c.synthetic) {
    dataset["synthetic"] = {{"n", c.synthetic->n}, {"k", c.synthetic->k}, {"seed", c.synthetic->seed}};
  }
  j = json{{"dataset", dataset},
           {"splits",
            {{"ae_train", c.splits.ae_train}, {"clf_train", c.splits.clf_train}, {"test", c.splits.test}}},
           {"pipeline", c.pipeline},
           {"out", c.out.string()}};
}

void from_json(const json& j, RunConfig& c) {
  reject_unknown(j, "config", {"dataset", "splits", "pipeline", "out"});
  if (auto it = j.find("dataset"); it != j.end()) {
    reject_unknown(*it, "dataset", {"attr_list", "images_dir", "identity_file", "synthetic"});
    std::string s;
    if (it->contains("attr_list")) { read(*it, "attr_list", s); c.attr_list = s; }
    if (it->contains("images_dir")) { read(*it, "images_dir", s); c.images_dir = s; }
    if (it->contains("identity_file")) { read(*it, "identity_file", s); c.identity_file = s; }
    if (auto syn = it->find("synthetic"); syn != it->end() && !syn->is_null()) {
      reject_unknown(*syn, "synthetic", {"n", "k", "seed"});
      SyntheticSpec spec;
      read(*syn, "n", spec.n);
      read(*syn, "k", spec.k);
      read(*syn, "seed", spec.seed);
      c.synthetic = spec;
    }
  }
  if (auto it = j.find("splits"); it != j.end()) {
    reject_unknown(*it, "splits", {"ae_train", "clf_train", "test"});
    read(*it, "ae_train", c.splits.ae_train);
    read(*it, "clf_train", c.splits.clf_train);
    read(*it, "test", c.splits.test);
  }
  if (auto it = j.find("pipeline"); it != j.end()) c.pipeline = it->get<PipelineConfig>();
  if (auto it = j.find("out"); it != j.end()) c.out = it->get<std::string>();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json(config).dump(2) << '\n';
}

AttributeDataset load_dataset(const RunConfig& config) {
  if (config.synthetic) {
    return gen_synthetic(config.synthetic->n, config.synthetic->k, config.synthetic->seed,
                         config.splits);
  }
  if (config.attr_list.empty()) throw ConfigError("dataset not found: no attribute list configured");
  if (!std::filesystem::exists(config.attr_list)) {
    throw ConfigError("dataset not found: " + config.attr_list.string());
  }
  // No image directory: images/ beside the list if present, else the list's own directory.
  std::filesystem::path images_dir = config.images_dir;
  if (images_dir.empty()) {
    const std::filesystem::path base = config.attr_list.parent_path();
    images_dir = std::filesystem::is_directory(base / "images") ? base / "images" : base;
  }
  AttributeDataset ds = load_attr_list(config.attr_list, images_dir, config.splits);
  if (!config.identity_file.empty()) {
    attach_identities(ds, load_identities(config.identity_file));
    assign_splits_by_identity(ds, config.splits);
    ds.validate();
  }
  return ds;
}

}  // namespace rcodean
