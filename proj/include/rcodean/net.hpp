#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "rcodean/errors.hpp"
#include "rcodean/layers.hpp"
#include "rcodean/mat.hpp"
#include "rcodean/rng.hpp"

namespace rcodean {

/// Position in the six-layer stack, in topological order.
enum class LayerId : std::size_t { enc1 = 0, enc2, enc3, dec1, dec2, dec3 };
inline constexpr std::size_t kNumLayers = 6;
inline constexpr std::size_t kNumEncoderLayers = 3;

std::string to_string(LayerId id);
LayerId layer_id_from_string(const std::string& name);

enum class SkipKind { cross, symmetric };
std::string to_string(SkipKind kind);
SkipKind skip_kind_from_string(const std::string& name);

/// Shortcut connection: src output is added to the pre-activation of dst,
/// through a learned projection when the dimensions differ.
struct SkipSpec {
  LayerId src = LayerId::enc1;
  LayerId dst = LayerId::enc3;
  SkipKind kind = SkipKind::cross;
  Mat projection;  // empty means identity

  bool has_projection() const { return !projection.empty(); }
  std::string label() const;
};

/// The six shortcut connections of the reference architecture: cross
/// enc1->enc3, enc2->dec1, enc3->dec2; symmetric enc1->dec3, enc2->dec2,
/// enc3->dec1. Projections are left empty; RCodeanNet::create fills them.
std::vector<SkipSpec> default_skips();

/// Weights of the Codean objective alpha*euc + beta*cos + lambda*L1(W_e).
struct CodeanParams {
  double alpha = 1.0;
  double beta = 1.0;
  double lambda = 0.01;

  void validate() const;
};

/// Residual Codean autoencoder: three encoder layers (d->l, l->l, l->l) with
/// relu, three decoder layers (l->l, l->l, l->d) with relu on the hidden
/// layers and a linear output, plus shortcut connections.
struct RCodeanNet {
  std::array<DenseLayer, kNumLayers> layers;
  std::vector<SkipSpec> skips;
  CodeanParams params;

  /// Glorot-initialized network. Each skip whose endpoint dimensions differ
  /// gets a Glorot-initialized projection matrix.
  static RCodeanNet create(std::size_t input_dim, std::size_t hidden_dim, CodeanParams params,
                           std::vector<SkipSpec> skips, Rng& rng);

  std::size_t input_dim() const { return layers[0].in_dim(); }
  std::size_t hidden_dim() const { return layers[0].out_dim(); }
  const DenseLayer& layer(LayerId id) const { return layers[static_cast<std::size_t>(id)]; }
  DenseLayer& layer(LayerId id) { return layers[static_cast<std::size_t>(id)]; }

  /// Checks layer chaining, skip ordering and projection shapes. Throws
  /// ConfigError naming the offending piece.
  void validate() const;

  /// Parameter arrays in a fixed order: for each layer weight then bias,
  /// then one projection per projected skip.
  std::vector<Mat*> parameters();
  std::vector<const Mat*> parameters() const;
  std::vector<std::string> parameter_names() const;
};

struct ForwardResult {
  Mat reconstruction;
  Mat code;
  std::array<LayerCache, kNumLayers> caches;
};

/// Columns of x are samples.
ForwardResult net_forward(const RCodeanNet& net, const Mat& x);

/// Output of enc3, including incoming cross-skip contributions.
Mat encode(const RCodeanNet& net, const Mat& x);

struct CodeanLoss {
  double total = 0.0;
  double euc = 0.0;  // mean over samples of ||x - x_hat||^2
  double cos = 0.0;  // mean over samples of -cos(x, x_hat)
  double reg = 0.0;  // sum of L1 norms of the encoder weights
  /// Some sample had a (near) zero reconstruction or input; its cosine term
  /// was skipped.
  bool degenerate = false;
};

inline constexpr double kDegenerateNorm = 1e-12;

/// Batch loss: per-sample terms are averaged over columns, reg is added once.
CodeanLoss codean_loss(const RCodeanNet& net, const Mat& x, const Mat& reconstruction);

/// Sum of L1 norms of the three encoder weight matrices.
double encoder_l1(const RCodeanNet& net);

struct NetGrads {
  std::vector<std::string> names;
  std::vector<Mat> values;  // same order as RCodeanNet::parameters()

  const Mat& at(const std::string& name) const;
};

struct BackwardOptions {
  /// Test hook: omit the cosine term from the output gradient.
  bool drop_cosine_gradient = false;
};

/// Gradient of codean_loss(net, x, net_forward(net, x).reconstruction).
NetGrads net_backward(const RCodeanNet& net, const Mat& x, const ForwardResult& fwd,
                      BackwardOptions options = {});

}  // namespace rcodean
