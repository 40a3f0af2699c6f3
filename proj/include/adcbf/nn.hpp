#pragma once

// Fully connected / shortcut network evaluation and the analytic Jacobian of
// the output with respect to the flattened weight vector.
//
// Layer j (j = 0..k) owns a weight matrix V_j of shape (in_j + 1) x out_j,
// where the extra input row multiplies the constant-1 bias slot. Weights are
// flattened layer by layer, each layer column-major (rows fastest), so that
// d(V_j^T a)/d vec(V_j) = I (x) a^T holds without permutation.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "adcbf/errors.hpp"

namespace adcbf::nn {

enum class Activation { Tanh, Swish, Identity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Swish: return "swish";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation parse_activation(std::string_view tag) {
  if (tag == "tanh") return Activation::Tanh;
  if (tag == "swish") return Activation::Swish;
  if (tag == "identity") return Activation::Identity;
  throw ConfigError("unknown activation tag '" + std::string(tag) + "'");
}

struct ActivationOutput {
  Vec value;       ///< size z+1, last entry is the bias slot (1)
  Vec derivative;  ///< diagonal of d value / d z, last entry 0
};

/// Elementwise activation with the bias slot appended.
inline ActivationOutput activation_eval(Activation tag, const Vec& z) {
  const Eigen::Index h = z.size();
  ActivationOutput out{Vec(h + 1), Vec(h + 1)};
  for (Eigen::Index i = 0; i < h; ++i) {
    const double x = z[i];
    switch (tag) {
      case Activation::Tanh: {
        const double t = std::tanh(x);
        out.value[i] = t;
        out.derivative[i] = 1.0 - t * t;
        break;
      }
      case Activation::Swish: {
        const double s = 1.0 / (1.0 + std::exp(-x));
        out.value[i] = x * s;
        out.derivative[i] = s + x * s * (1.0 - s);
        break;
      }
      case Activation::Identity:
        out.value[i] = x;
        out.derivative[i] = 1.0;
        break;
    }
  }
  out.value[h] = 1.0;
  out.derivative[h] = 0.0;
  return out;
}

struct Architecture {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden_widths;    ///< neurons per hidden layer, k entries
  std::vector<Activation> activations;  ///< one per hidden layer
  std::vector<bool> shortcuts;       ///< one per hidden layer; see validate()

  int num_layers() const { return static_cast<int>(hidden_widths.size()) + 1; }

  /// Input rows of V_j, bias row included.
  int layer_in(int j) const { return (j == 0 ? input_dim : hidden_widths[j - 1]) + 1; }
  int layer_out(int j) const {
    return j == static_cast<int>(hidden_widths.size()) ? output_dim : hidden_widths[j];
  }

  /// Shortcut on weight layer j >= 1 means Phi_j = V_j^T phi_j(Phi_{j-1}) + Phi_{j-1}.
  /// The flag for hidden layer i (1-based) applies to weight layer j = i.
  bool has_shortcut(int j) const { return j >= 1 && shortcuts[j - 1]; }

  std::size_t param_count() const {
    std::size_t p = 0;
    for (int j = 0; j < num_layers(); ++j) p += static_cast<std::size_t>(layer_in(j) * layer_out(j));
    return p;
  }

  std::size_t offset(int j) const {
    std::size_t off = 0;
    for (int l = 0; l < j; ++l) off += static_cast<std::size_t>(layer_in(l) * layer_out(l));
    return off;
  }

  void validate() const {
    if (input_dim <= 0 || output_dim <= 0) throw DimensionError("network input/output dims must be positive");
    const std::size_t k = hidden_widths.size();
    if (activations.size() != k || shortcuts.size() != k) {
      throw DimensionError("activation and shortcut lists must have one entry per hidden layer");
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (hidden_widths[i] <= 0) throw DimensionError("hidden layer " + std::to_string(i + 1) + " has no neurons");
      const int j = static_cast<int>(i) + 1;
      if (shortcuts[i] && layer_in(j) - 1 != layer_out(j)) {
        throw DimensionError("shortcut on layer " + std::to_string(j) + " needs equal widths (" +
                             std::to_string(layer_in(j) - 1) + " vs " + std::to_string(layer_out(j)) + ")");
      }
    }
  }

  /// Hidden layers of equal width with shortcuts wherever the widths allow.
  static Architecture resnet(int in, int out, int depth, int width, Activation act) {
    Architecture a;
    a.input_dim = in;
    a.output_dim = out;
    a.hidden_widths.assign(static_cast<std::size_t>(depth), width);
    a.activations.assign(static_cast<std::size_t>(depth), act);
    a.shortcuts.assign(static_cast<std::size_t>(depth), false);
    for (int i = 0; i + 1 < depth; ++i) a.shortcuts[static_cast<std::size_t>(i)] = true;
    a.validate();
    return a;
  }
};

/// Copy out V_j from the flat weight vector.
inline Mat layer_matrix(const Architecture& arch, const Vec& theta, int j) {
  const int rows = arch.layer_in(j);
  const int cols = arch.layer_out(j);
  return Eigen::Map<const Mat>(theta.data() + arch.offset(j), rows, cols);
}

/// Inverse of layer_matrix over all layers.
inline Vec flatten(const Architecture& arch, const std::vector<Mat>& layers) {
  Vec theta(static_cast<Eigen::Index>(arch.param_count()));
  for (int j = 0; j < arch.num_layers(); ++j) {
    const Mat& V = layers[static_cast<std::size_t>(j)];
    require_dim(V.rows(), arch.layer_in(j), "layer " + std::to_string(j) + " rows");
    require_dim(V.cols(), arch.layer_out(j), "layer " + std::to_string(j) + " cols");
    Eigen::Map<Mat>(theta.data() + arch.offset(j), V.rows(), V.cols()) = V;
  }
  return theta;
}

inline std::vector<Mat> unflatten(const Architecture& arch, const Vec& theta) {
  require_dim(theta.size(), static_cast<Eigen::Index>(arch.param_count()), "weight vector length");
  std::vector<Mat> out;
  for (int j = 0; j < arch.num_layers(); ++j) out.push_back(layer_matrix(arch, theta, j));
  return out;
}

/// Intermediate quantities from one forward pass, reused by the Jacobian.
struct ForwardPass {
  std::vector<Vec> inputs;       ///< a_j: sigma_a for j = 0, phi_j(Phi_{j-1}) otherwise
  std::vector<Vec> derivatives;  ///< diagonal phi_j' for j >= 1 (entry 0 unused)
  Vec output;
};

inline void check_shapes(const Architecture& arch, const Vec& theta, const Vec& sigma) {
  require_dim(sigma.size(), arch.input_dim, "network input");
  require_dim(theta.size(), static_cast<Eigen::Index>(arch.param_count()), "weight vector length");
}

inline ForwardPass forward_pass(const Architecture& arch, const Vec& theta, const Vec& sigma) {
  check_shapes(arch, theta, sigma);
  const int layers = arch.num_layers();
  ForwardPass fp;
  fp.inputs.resize(static_cast<std::size_t>(layers));
  fp.derivatives.resize(static_cast<std::size_t>(layers));

  Vec a(sigma.size() + 1);
  a.head(sigma.size()) = sigma;
  a[sigma.size()] = 1.0;
  fp.inputs[0] = a;
  Vec phi = layer_matrix(arch, theta, 0).transpose() * a;

  for (int j = 1; j < layers; ++j) {
    auto act = activation_eval(arch.activations[static_cast<std::size_t>(j - 1)], phi);
    const auto V = Eigen::Map<const Mat>(theta.data() + arch.offset(j), arch.layer_in(j), arch.layer_out(j));
    Vec next = V.transpose() * act.value;
    if (arch.has_shortcut(j)) next += phi;
    fp.inputs[static_cast<std::size_t>(j)] = std::move(act.value);
    fp.derivatives[static_cast<std::size_t>(j)] = std::move(act.derivative);
    phi = std::move(next);
  }
  fp.output = std::move(phi);
  return fp;
}

inline Vec forward(const Architecture& arch, const Vec& theta, const Vec& sigma) {
  return forward_pass(arch, theta, sigma).output;
}

/// Jacobian of the output with respect to theta (output_dim x p), built from
/// the right-to-left product of (V_l^T phi_l' [+ I]) factors.
inline Mat jacobian_from_pass(const Architecture& arch, const Vec& theta, const ForwardPass& fp) {
  const int layers = arch.num_layers();
  const Eigen::Index out = arch.output_dim;
  Mat J = Mat::Zero(out, static_cast<Eigen::Index>(arch.param_count()));
  Mat M = Mat::Identity(out, out);  // dPhi_k / dPhi_j

  for (int j = layers - 1; j >= 0; --j) {
    const Vec& a = fp.inputs[static_cast<std::size_t>(j)];
    const Eigen::Index rows = arch.layer_in(j);
    const Eigen::Index cols = arch.layer_out(j);
    const Eigen::Index off = static_cast<Eigen::Index>(arch.offset(j));
    for (Eigen::Index c = 0; c < cols; ++c) {
      J.block(0, off + c * rows, out, rows).noalias() = M.col(c) * a.transpose();
    }
    if (j == 0) break;
    const auto V = Eigen::Map<const Mat>(theta.data() + off, rows, cols);
    const Vec& d = fp.derivatives[static_cast<std::size_t>(j)];
    // V^T diag(d) restricted to the non-bias rows.
    Mat factor = V.topRows(rows - 1).transpose() * d.head(rows - 1).asDiagonal();
    if (arch.has_shortcut(j)) factor.diagonal().array() += 1.0;
    M = M * factor;
  }
  return J;
}

inline Mat jacobian_weights(const Architecture& arch, const Vec& theta, const Vec& sigma) {
  return jacobian_from_pass(arch, theta, forward_pass(arch, theta, sigma));
}

struct Evaluation {
  Vec value;
  Mat jacobian;
};

inline Evaluation evaluate(const Architecture& arch, const Vec& theta, const Vec& sigma) {
  auto fp = forward_pass(arch, theta, sigma);
  Mat J = jacobian_from_pass(arch, theta, fp);
  return {std::move(fp.output), std::move(J)};
}

/// Draw theta ~ N(0, variance) elementwise.
template <class Rng>
Vec random_weights(const Architecture& arch, double variance, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  Vec theta(static_cast<Eigen::Index>(arch.param_count()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = dist(rng);
  return theta;
}

}  // namespace adcbf::nn
