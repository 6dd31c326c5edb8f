#include "rcodean/net.hpp"

#include <cmath>

namespace rcodean {

namespace {

constexpr std::array<const char*, kNumLayers> kLayerNames = {"enc1", "enc2", "enc3",
                                                            "dec1", "dec2", "dec3"};

std::size_t idx(LayerId id) { return static_cast<std::size_t>(id); }

// Sum of all skip contributions entering layer dst, or an empty Mat.
Mat incoming_skips(const RCodeanNet& net, std::size_t dst,
                   const std::array<LayerCache, kNumLayers>& caches) {
  Mat sum;
  for (const SkipSpec& s : net.skips) {
    if (idx(s.dst) != dst) continue;
    const Mat& src_out = caches[idx(s.src)].output;
    Mat contrib = s.has_projection() ? matmul(s.projection, src_out) : src_out;
    if (sum.empty()) {
      sum = std::move(contrib);
    } else {
      if (!sum.same_shape(contrib)) throw ConfigError("skip " + s.label() + ": shape mismatch");
      sum += contrib;
    }
  }
  return sum;
}

}  // namespace

std::string to_string(LayerId id) { return kLayerNames.at(idx(id)); }

LayerId layer_id_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kNumLayers; ++i) {
    if (name == kLayerNames[i]) return static_cast<LayerId>(i);
  }
  throw ConfigError("unknown layer id '" + name + "'");
}

std::string to_string(SkipKind kind) { return kind == SkipKind::cross ? "cross" : "symmetric"; }

SkipKind skip_kind_from_string(const std::string& name) {
  if (name == "cross") return SkipKind::cross;
  if (name == "symmetric") return SkipKind::symmetric;
  throw ConfigError("unknown skip kind '" + name + "'");
}

std::string SkipSpec::label() const {
  return to_string(kind) + " " + to_string(src) + "->" + to_string(dst);
}

std::vector<SkipSpec> default_skips() {
  using L = LayerId;
  return {
      {L::enc1, L::enc3, SkipKind::cross, {}},     {L::enc2, L::dec1, SkipKind::cross, {}},
      {L::enc3, L::dec2, SkipKind::cross, {}},     {L::enc1, L::dec3, SkipKind::symmetric, {}},
      {L::enc2, L::dec2, SkipKind::symmetric, {}}, {L::enc3, L::dec1, SkipKind::symmetric, {}},
  };
}

void CodeanParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(lambda >= 0.0)) {
    throw ConfigError("Codean weights must be nonnegative");
  }
  if (!(alpha + beta > 0.0)) throw ConfigError("alpha + beta must be positive");
}

RCodeanNet RCodeanNet::create(std::size_t input_dim, std::size_t hidden_dim, CodeanParams params,
                              std::vector<SkipSpec> skips, Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("network dimensions must be positive");
  params.validate();
  RCodeanNet net;
  net.params = params;
  for (std::size_t i = 0; i < kNumLayers; ++i) {
    const std::size_t in = i == 0 ? input_dim : hidden_dim;
    const std::size_t out = i == kNumLayers - 1 ? input_dim : hidden_dim;
    const Activation act = i == kNumLayers - 1 ? Activation::identity : Activation::relu;
    net.layers[i] = DenseLayer::glorot(kLayerNames[i], in, out, act, rng);
  }
  for (SkipSpec& s : skips) {
    const std::size_t src_dim = net.layer(s.src).out_dim();
    const std::size_t dst_dim = net.layer(s.dst).out_dim();
    if (src_dim != dst_dim) {
      const double limit = std::sqrt(6.0 / static_cast<double>(src_dim + dst_dim));
      s.projection = Mat(dst_dim, src_dim);
      for (double& w : s.projection.values()) w = rng.uniform(-limit, limit);
    } else {
      s.projection = Mat();
    }
  }
  net.skips = std::move(skips);
  net.validate();
  return net;
}

void RCodeanNet::validate() const {
  params.validate();
  for (std::size_t i = 0; i < kNumLayers; ++i) {
    layers[i].validate();
    if (i > 0 && layers[i].in_dim() != layers[i - 1].out_dim()) {
      throw ConfigError("layer " + layers[i].name + " input does not chain from " +
                        layers[i - 1].name);
    }
  }
  if (layers[kNumLayers - 1].out_dim() != layers[0].in_dim()) {
    throw ConfigError("decoder output dimension differs from input dimension");
  }
  for (const SkipSpec& s : skips) {
    if (idx(s.src) >= idx(s.dst)) {
      throw ConfigError("skip " + s.label() + ": source must precede destination");
    }
    const std::size_t src_dim = layer(s.src).out_dim();
    const std::size_t dst_dim = layer(s.dst).out_dim();
    if (src_dim != dst_dim) {
      if (!s.has_projection()) {
        throw ConfigError("skip " + s.label() + ": dimension change " + std::to_string(src_dim) +
                          "->" + std::to_string(dst_dim) + " requires a projection");
      }
      if (s.projection.rows() != dst_dim || s.projection.cols() != src_dim) {
        throw ConfigError("skip " + s.label() + ": projection " + s.projection.shape_str() +
                          " should be " + std::to_string(dst_dim) + "x" + std::to_string(src_dim));
      }
    } else if (s.has_projection()) {
      throw ConfigError("skip " + s.label() + ": projection given for equal dimensions");
    }
  }
}

std::vector<Mat*> RCodeanNet::parameters() {
  std::vector<Mat*> out;
  for (DenseLayer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (SkipSpec& s : skips) {
    if (s.has_projection()) out.push_back(&s.projection);
  }
  return out;
}

std::vector<const Mat*> RCodeanNet::parameters() const {
  std::vector<const Mat*> out;
  for (const DenseLayer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (const SkipSpec& s : skips) {
    if (s.has_projection()) out.push_back(&s.projection);
  }
  return out;
}

std::vector<std::string> RCodeanNet::parameter_names() const {
  std::vector<std::string> out;
  for (const DenseLayer& l : layers) {
    out.push_back(l.name + ".weight");
    out.push_back(l.name + ".bias");
  }
  for (const SkipSpec& s : skips) {
    if (s.has_projection()) out.push_back("skip[" + s.label() + "].projection");
  }
  return out;
}

ForwardResult net_forward(const RCodeanNet& net, const Mat& x) {
  if (x.rows() != net.input_dim()) {
    throw ShapeError("net_forward: input " + x.shape_str() + " but network expects " +
                     std::to_string(net.input_dim()) + " rows");
  }
  ForwardResult out;
  for (std::size_t i = 0; i < kNumLayers; ++i) {
    const Mat& input = i == 0 ? x : out.caches[i - 1].output;
    Mat skip = incoming_skips(net, i, out.caches);
    if (skip.empty()) {
      out.caches[i] = dense_forward(net.layers[i], input);
    } else {
      if (skip.rows() != net.layers[i].out_dim()) {
        throw ConfigError("skips into " + net.layers[i].name + " produce " + skip.shape_str() +
                          " but the layer has " + std::to_string(net.layers[i].out_dim()) +
                          " units");
      }
      out.caches[i] = dense_forward(net.layers[i], input, skip);
    }
  }
  out.code = out.caches[idx(LayerId::enc3)].output;
  out.reconstruction = out.caches[kNumLayers - 1].output;
  return out;
}

Mat encode(const RCodeanNet& net, const Mat& x) {
  if (x.rows() != net.input_dim()) {
    throw ShapeError("encode: input " + x.shape_str() + " but network expects " +
                     std::to_string(net.input_dim()) + " rows");
  }
  std::array<LayerCache, kNumLayers> caches;
  for (std::size_t i = 0; i < kNumEncoderLayers; ++i) {
    const Mat& input = i == 0 ? x : caches[i - 1].output;
    Mat skip = incoming_skips(net, i, caches);
    caches[i] = skip.empty() ? dense_forward(net.layers[i], input)
                             : dense_forward(net.layers[i], input, skip);
  }
  return std::move(caches[idx(LayerId::enc3)].output);
}

double encoder_l1(const RCodeanNet& net) {
  double reg = 0.0;
  for (std::size_t i = 0; i < kNumEncoderLayers; ++i) reg += norms(net.layers[i].weight).l1;
  return reg;
}

CodeanLoss codean_loss(const RCodeanNet& net, const Mat& x, const Mat& reconstruction) {
  if (!x.same_shape(reconstruction)) {
    throw ShapeError("codean_loss: input " + x.shape_str() + " vs reconstruction " +
                     reconstruction.shape_str());
  }
  CodeanLoss loss;
  const std::size_t n = x.cols();
  for (std::size_t j = 0; j < n; ++j) {
    double euc = 0.0, xr = 0.0, xx = 0.0, rr = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double a = x(r, j);
      const double b = reconstruction(r, j);
      euc += (a - b) * (a - b);
      xr += a * b;
      xx += a * a;
      rr += b * b;
    }
    loss.euc += euc;
    const double nx = std::sqrt(xx);
    const double nr = std::sqrt(rr);
    if (nx < kDegenerateNorm || nr < kDegenerateNorm) {
      loss.degenerate = true;
    } else {
      loss.cos += -xr / (nx * nr);
    }
  }
  if (n > 0) {
    loss.euc /= static_cast<double>(n);
    loss.cos /= static_cast<double>(n);
  }
  loss.reg = encoder_l1(net);
  const CodeanParams& p = net.params;
  loss.total = p.alpha * loss.euc + p.beta * loss.cos + p.lambda * loss.reg;
  return loss;
}

const Mat& NetGrads::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw std::out_of_range("no gradient named '" + name + "'");
}

NetGrads net_backward(const RCodeanNet& net, const Mat& x, const ForwardResult& fwd,
                      BackwardOptions options) {
  const Mat& recon = fwd.reconstruction;
  if (!x.same_shape(recon) || x.rows() != net.input_dim()) {
    throw std::logic_error("net_backward: caches do not match input " + x.shape_str());
  }
  for (std::size_t i = 0; i < kNumLayers; ++i) {
    if (fwd.caches[i].output.rows() != net.layers[i].out_dim() ||
        fwd.caches[i].output.cols() != x.cols()) {
      throw std::logic_error("net_backward: stale cache for layer " + net.layers[i].name);
    }
  }

  const CodeanParams& p = net.params;
  const std::size_t n = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL/d(reconstruction)
  Mat grad_recon(x.rows(), n);
  for (std::size_t j = 0; j < n; ++j) {
    double xr = 0.0, xx = 0.0, rr = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      xr += x(r, j) * recon(r, j);
      xx += x(r, j) * x(r, j);
      rr += recon(r, j) * recon(r, j);
    }
    const double nx = std::sqrt(xx);
    const double nr = std::sqrt(rr);
    const bool use_cos =
        p.beta != 0.0 && !options.drop_cosine_gradient && nx >= kDegenerateNorm && nr >= kDegenerateNorm;
    const double a = use_cos ? 1.0 / (nx * nr) : 0.0;
    const double b = use_cos ? xr / (nx * nr * nr * nr) : 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double g = 2.0 * p.alpha * (recon(r, j) - x(r, j));
      if (use_cos) g += p.beta * -(x(r, j) * a - recon(r, j) * b);
      grad_recon(r, j) = g * inv_n;
    }
  }

  std::array<Mat, kNumLayers> grad_out;
  for (std::size_t i = 0; i + 1 < kNumLayers; ++i) {
    grad_out[i] = Mat(net.layers[i].out_dim(), n);
  }
  grad_out[kNumLayers - 1] = std::move(grad_recon);

  NetGrads grads;
  grads.names = net.parameter_names();
  grads.values.resize(grads.names.size());

  // Index of each projected skip's gradient slot.
  std::vector<std::size_t> proj_slot(net.skips.size(), 0);
  {
    std::size_t slot = 2 * kNumLayers;
    for (std::size_t s = 0; s < net.skips.size(); ++s) {
      if (net.skips[s].has_projection()) proj_slot[s] = slot++;
    }
  }

  for (std::size_t i = kNumLayers; i-- > 0;) {
    const DenseLayer& layer = net.layers[i];
    DenseGrads g = dense_backward(layer, fwd.caches[i], grad_out[i]);
    if (i < kNumEncoderLayers && p.lambda != 0.0) {
      auto gw = g.grad_weight.values();
      auto w = layer.weight.values();
      for (std::size_t k = 0; k < gw.size(); ++k) {
        const double sign = w[k] > 0.0 ? 1.0 : (w[k] < 0.0 ? -1.0 : 0.0);
        gw[k] += p.lambda * sign;
      }
    }
    if (i > 0) grad_out[i - 1] += g.grad_in;
    for (std::size_t s = 0; s < net.skips.size(); ++s) {
      const SkipSpec& skip = net.skips[s];
      if (idx(skip.dst) != i) continue;
      const std::size_t src = idx(skip.src);
      if (skip.has_projection()) {
        grads.values[proj_slot[s]] = matmul_nt(g.grad_skip, fwd.caches[src].output);
        grad_out[src] += matmul_tn(skip.projection, g.grad_skip);
      } else {
        grad_out[src] += g.grad_skip;
      }
    }
    grads.values[2 * i] = std::move(g.grad_weight);
    grads.values[2 * i + 1] = std::move(g.grad_bias);
  }
  return grads;
}

}  // namespace rcodean
