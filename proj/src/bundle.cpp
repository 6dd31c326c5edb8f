#include "rcodean/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>
#include <zlib.h>

#include "rcodean/config.hpp"

namespace rcodean {

using nlohmann::json;

namespace {

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void array(const std::string& name, const Mat& m) {
    str(name);
    u64(m.rows());
    u64(m.cols());
    for (double v : m.values()) f64(v);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  void need(std::size_t n) const {
    if (n > size_ - pos_) throw CorruptionError("bundle: unexpected end of data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32_z(crc32(0L, Z_NULL, 0), data, n));
}

json layers_json(const std::vector<const DenseLayer*>& layers) {
  json out = json::array();
  for (const DenseLayer* l : layers) out.push_back({{"name", l->name}, {"act", to_string(l->act)}});
  return out;
}

std::vector<const DenseLayer*> layer_ptrs(const MlpHead& head) {
  std::vector<const DenseLayer*> out;
  for (const DenseLayer& l : head.layers) out.push_back(&l);
  return out;
}

// Collects named arrays in the order they will be written.
struct ArrayList {
  std::vector<std::string> names;
  std::vector<const Mat*> values;
  std::vector<Mat> owned_storage;

  void add(std::string name, const Mat* m) {
    names.push_back(std::move(name));
    values.push_back(m);
  }
};

Mat tree_to_mat(const DecisionTree& tree) {
  Mat m(tree.nodes.size(), 5);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    m(i, 0) = n.feature;
    m(i, 1) = n.threshold;
    m(i, 2) = n.left;
    m(i, 3) = n.right;
    m(i, 4) = n.value;
  }
  return m;
}

DecisionTree tree_from_mat(const Mat& m, std::size_t num_features) {
  if (m.cols() != 5 || m.rows() == 0) throw CorruptionError("bundle: malformed tree array");
  DecisionTree tree;
  const auto count = static_cast<int>(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    TreeNode n;
    n.feature = static_cast<int>(m(i, 0));
    n.threshold = m(i, 1);
    n.left = static_cast<int>(m(i, 2));
    n.right = static_cast<int>(m(i, 3));
    n.value = m(i, 4);
    if (!n.is_leaf() && (n.feature >= static_cast<int>(num_features) || n.left <= static_cast<int>(i) ||
                         n.right <= static_cast<int>(i) || n.left >= count || n.right >= count)) {
      throw CorruptionError("bundle: tree node " + std::to_string(i) + " is inconsistent");
    }
    tree.nodes.push_back(n);
  }
  return tree;
}

class ArrayQueue {
 public:
  explicit ArrayQueue(std::vector<std::pair<std::string, Mat>> arrays) : arrays_(std::move(arrays)) {}

  Mat take(const std::string& expected) {
    if (next_ >= arrays_.size()) throw CorruptionError("bundle: missing array '" + expected + "'");
    auto& [name, m] = arrays_[next_++];
    if (name != expected) {
      throw CorruptionError("bundle: expected array '" + expected + "', found '" + name + "'");
    }
    return std::move(m);
  }
  bool done() const { return next_ == arrays_.size(); }

 private:
  std::vector<std::pair<std::string, Mat>> arrays_;
  std::size_t next_ = 0;
};

MlpHead read_head(const json& layers, const std::string& prefix, ArrayQueue& q) {
  MlpHead head;
  for (const json& l : layers) {
    DenseLayer layer;
    layer.name = l.at("name").get<std::string>();
    layer.act = activation_from_string(l.at("act").get<std::string>());
    layer.weight = q.take(prefix + layer.name + ".weight");
    layer.bias = q.take(prefix + layer.name + ".bias");
    layer.validate();
    if (!head.layers.empty() && head.layers.back().out_dim() != layer.in_dim()) {
      throw CorruptionError("bundle: head layer " + prefix + layer.name + " does not chain");
    }
    head.layers.push_back(std::move(layer));
  }
  return head;
}

}  // namespace

std::vector<std::uint8_t> encode_bundle(const AttributeModel& model) {
  model.check_ready();
  const std::size_t k = model.num_attributes();
  ArrayList arrays;
  json sources = json::array();
  for (std::size_t s = 0; s < kNumSources; ++s) {
    const RCodeanNet& net = model.stage1[s].net;
    std::vector<const DenseLayer*> net_layers;
    for (const DenseLayer& l : net.layers) net_layers.push_back(&l);
    json skips = json::array();
    for (const SkipSpec& sk : net.skips) {
      skips.push_back({{"src", to_string(sk.src)},
                       {"dst", to_string(sk.dst)},
                       {"kind", to_string(sk.kind)},
                       {"projected", sk.has_projection()}});
    }
    sources.push_back({{"codean",
                        {{"alpha", net.params.alpha}, {"beta", net.params.beta}, {"lambda", net.params.lambda}}},
                       {"layers", layers_json(net_layers)},
                       {"skips", skips},
                       {"head_layers", layers_json(layer_ptrs(model.stage1[s].head))}});
    const std::string prefix = "s" + std::to_string(s) + ".";
    const auto names = net.parameter_names();
    const auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) arrays.add(prefix + "net." + names[i], params[i]);
    for (const DenseLayer& l : model.stage1[s].head.layers) {
      arrays.add(prefix + "head." + l.name + ".weight", &l.weight);
      arrays.add(prefix + "head." + l.name + ".bias", &l.bias);
    }
  }
  arrays.add("patch_weights", &model.patch_weights);
  for (const DenseLayer& l : model.stage2.mlp.layers) {
    arrays.add("stage2.mlp." + l.name + ".weight", &l.weight);
    arrays.add("stage2.mlp." + l.name + ".bias", &l.bias);
  }
  json tree_counts = json::array();
  std::vector<Mat> tree_mats;
  for (const auto& per_attr : model.stage2.forest.trees) {
    tree_counts.push_back(per_attr.size());
    for (const DecisionTree& t : per_attr) tree_mats.push_back(tree_to_mat(t));
  }
  {
    std::size_t i = 0;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t t = 0; t < model.stage2.forest.trees[a].size(); ++t, ++i)
        arrays.add("stage2.forest.a" + std::to_string(a) + ".t" + std::to_string(t), &tree_mats[i]);
  }
  arrays.add("stage2.svm.weights", &model.stage2.svm.weights);
  arrays.add("stage2.svm.bias", &model.stage2.svm.bias);

  const json header = {
      {"config", model.config},
      {"attributes", model.attribute_names},
      {"sources", sources},
      {"stage2_mlp_layers", layers_json(layer_ptrs(model.stage2.mlp))},
      {"forest", {{"num_features", model.stage2.forest.num_features}, {"trees", tree_counts}}},
      {"arrays", arrays.names},
  };

  Writer w;
  w.raw(kBundleMagic, sizeof kBundleMagic);
  w.u32(kBundleVersion);
  w.str(header.dump());
  w.u64(arrays.names.size());
  for (std::size_t i = 0; i < arrays.names.size(); ++i) w.array(arrays.names[i], *arrays.values[i]);
  const std::uint32_t crc = crc32_of(w.bytes().data(), w.bytes().size());
  w.u32(crc);
  return std::move(w.bytes());
}

AttributeModel decode_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kBundleMagic + 4 + 4 ||
      std::memcmp(bytes.data(), kBundleMagic, sizeof kBundleMagic) != 0) {
    throw CorruptionError("not a model bundle (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc32_of(bytes.data(), body)) {
    throw CorruptionError("bundle checksum mismatch: file is corrupted");
  }
  Reader r(bytes.data() + sizeof kBundleMagic, body - sizeof kBundleMagic);
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion) {
    throw VersionError("bundle format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kBundleVersion) + ")");
  }

  json header;
  try {
    header = json::parse(r.str());
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("bundle header: ") + e.what());
  }

  std::vector<std::pair<std::string, Mat>> arrays;
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != 0 && cols > r.remaining() / 8 / rows) throw CorruptionError("bundle: array '" + name + "' overruns file");
    std::vector<double> data(rows * cols);
    for (double& v : data) v = r.f64();
    arrays.emplace_back(std::move(name), Mat(rows, cols, std::move(data)));
  }
  if (r.remaining() != 0) throw CorruptionError("bundle: trailing bytes after arrays");

  AttributeModel model;
  try {
    model.config = header.at("config").get<PipelineConfig>();
    model.attribute_names = header.at("attributes").get<std::vector<std::string>>();
    ArrayQueue q(std::move(arrays));
    const json& sources = header.at("sources");
    if (sources.size() != kNumSources) throw CorruptionError("bundle: expected 10 source models");
    for (std::size_t s = 0; s < kNumSources; ++s) {
      const json& src = sources[s];
      const std::string prefix = "s" + std::to_string(s) + ".";
      RCodeanNet net;
      net.params.alpha = src.at("codean").at("alpha").get<double>();
      net.params.beta = src.at("codean").at("beta").get<double>();
      net.params.lambda = src.at("codean").at("lambda").get<double>();
      const json& layers = src.at("layers");
      if (layers.size() != kNumLayers) throw CorruptionError("bundle: network must have 6 layers");
      for (std::size_t i = 0; i < kNumLayers; ++i) {
        DenseLayer& l = net.layers[i];
        l.name = layers[i].at("name").get<std::string>();
        l.act = activation_from_string(layers[i].at("act").get<std::string>());
        l.weight = q.take(prefix + "net." + l.name + ".weight");
        l.bias = q.take(prefix + "net." + l.name + ".bias");
      }
      for (const json& sk : src.at("skips")) {
        SkipSpec spec{layer_id_from_string(sk.at("src").get<std::string>()),
                      layer_id_from_string(sk.at("dst").get<std::string>()),
                      skip_kind_from_string(sk.at("kind").get<std::string>()), Mat()};
        net.skips.push_back(std::move(spec));
      }
      for (std::size_t i = 0; i < net.skips.size(); ++i) {
        if (src.at("skips")[i].at("projected").get<bool>()) {
          net.skips[i].projection = q.take(prefix + "net.skip[" + net.skips[i].label() + "].projection");
        }
      }
      net.validate();
      model.stage1[s].net = std::move(net);
      model.stage1[s].head = read_head(src.at("head_layers"), prefix + "head.", q);
    }
    model.patch_weights = q.take("patch_weights");
    model.stage2.mlp = read_head(header.at("stage2_mlp_layers"), "stage2.mlp.", q);
    const json& forest = header.at("forest");
    model.stage2.forest.num_features = forest.at("num_features").get<std::size_t>();
    const auto tree_counts = forest.at("trees").get<std::vector<std::size_t>>();
    model.stage2.forest.trees.resize(tree_counts.size());
    for (std::size_t a = 0; a < tree_counts.size(); ++a) {
      for (std::size_t t = 0; t < tree_counts[a]; ++t) {
        model.stage2.forest.trees[a].push_back(tree_from_mat(
            q.take("stage2.forest.a" + std::to_string(a) + ".t" + std::to_string(t)),
            model.stage2.forest.num_features));
      }
    }
    model.stage2.svm.weights = q.take("stage2.svm.weights");
    model.stage2.svm.bias = q.take("stage2.svm.bias");
    if (!q.done()) throw CorruptionError("bundle: unexpected extra arrays");
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("bundle header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("bundle structure: ") + e.what());
  } catch (const ShapeError& e) {
    throw CorruptionError(std::string("bundle structure: ") + e.what());
  }
  try {
    model.check_ready();
  } catch (const std::logic_error& e) {
    throw CorruptionError(std::string("bundle is incomplete: ") + e.what());
  }
  return model;
}

void save_bundle(const AttributeModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write bundle " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing bundle " + path.string());
}

AttributeModel load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("bundle not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_bundle(bytes);
}

AttributeModel load_bundle(const std::filesystem::path& path, std::size_t expected_attributes) {
  AttributeModel model = load_bundle(path);
  if (model.num_attributes() != expected_attributes) {
    throw ConfigError("bundle predicts " + std::to_string(model.num_attributes()) +
                      " attributes but " + std::to_string(expected_attributes) + " were expected");
  }
  return model;
}

}  // namespace rcodean
