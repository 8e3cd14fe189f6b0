#pragma once

#include "nglab/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace nglab {

enum class DerivativeMode { analytic, finite_difference };

/// A C^3 loss L: R^m -> [0, inf) with value, gradient and Hessian evaluators.
///
/// Evaluators are pure; a SmoothLoss can be shared read-only across threads.
struct SmoothLoss {
  int dim = 0;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
  DerivativeMode mode = DerivativeMode::analytic;
  double fd_step = 0.0;  // only meaningful for finite_difference mode
  std::string id;
};

/// Wraps a value-only function; gradient h = 1e-5, Hessian by second
/// differences with h = 1e-3.
SmoothLoss make_fd_loss(int dim, std::function<double(const Vec&)> value,
                        std::string id = "fd");

/// Supervised data: N inputs (rows of `inputs`) with scalar labels.
struct Dataset {
  Mat inputs;  // N x d_in
  Vec labels;  // N

  [[nodiscard]] int size() const { return static_cast<int>(labels.size()); }
  [[nodiscard]] int dim_in() const { return static_cast<int>(inputs.cols()); }
  [[nodiscard]] Vec input(int i) const { return inputs.row(i).transpose(); }

  /// Throws ConfigError on empty, mismatched or non-finite data.
  void validate() const;
};

/// Reads CSV with header `x1,...,xd,y`.
Dataset load_dataset_csv(const std::filesystem::path& path);
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);

/// Parametric model f_w(x).
struct Predictor {
  int dim_w = 0;
  int dim_in = 0;
  std::function<double(const Vec& w, const Vec& x)> predict;
  std::function<Vec(const Vec& w, const Vec& x)> grad_w;
  // Optional; empty means central differences of grad_w.
  std::function<Mat(const Vec& w, const Vec& x)> hess_w;
  std::string id;
};

Mat predictor_hessian(const Predictor& pred, const Vec& w, const Vec& x);

/// L(w) = (|w|^2-1)^2/(|w|^2+1)^2 * (1 + a sin(b w_1)); zero set is the unit
/// circle.
SmoothLoss ring_sine_loss(double a = 0.7, double b = 5.0);

/// L(w) = 1/2 w^T A w for symmetric PSD A.
SmoothLoss quadratic_loss(const Mat& A);

/// L(w) = (1/N) sum_i (f_w(x_i) - y_i)^2.
SmoothLoss mse_empirical_loss(const Predictor& pred, const Dataset& data);

/// Per-sample residuals f_w(x_i) - y_i.
Vec residuals(const Predictor& pred, const Dataset& data, const Vec& w);

/// f_w(x) = <u^2 - v^2, x>, w = (u, v).
Predictor olm_predictor(int d_in);

// Smooth rectifier s(x) = x exp(-1/x) for x > 0, else 0.
double smooth_relu(double x);
double smooth_relu_d1(double x);
double smooth_relu_d2(double x);

/// f_w(x) = sum_j a_j s(b_j^T x), w = (a_1..a_n, b_1, ..., b_n).
Predictor shallow_nn_predictor(int n_hidden, int d_in);

/// Parameter layout of a feed-forward network with dims d_0, ..., d_p = 1:
/// for each layer k = 1..p, the weight matrix W^k (d_k x d_{k-1}, row-major)
/// followed by its bias b^k. Hidden layers apply the smooth rectifier; the
/// output layer is affine.
class DeepLayout {
 public:
  explicit DeepLayout(std::vector<int> dims);

  [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
  [[nodiscard]] int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  [[nodiscard]] int dim_w() const { return total_; }
  [[nodiscard]] int weight_offset(int layer) const { return offsets_[layer]; }
  [[nodiscard]] int bias_offset(int layer) const;
  /// Width of the input feeding layer k (1-based), i.e. d_{k-1}.
  [[nodiscard]] int input_width(int layer) const { return dims_[layer - 1]; }

  /// Forward pass with optional multiplicative filters (1 + eta) on the
  /// inputs of the listed layers. Filters for listed layers are packed in
  /// `eta` in increasing layer order.
  [[nodiscard]] double forward(const Vec& w, const Vec& x, const Vec* eta = nullptr,
                               const std::vector<int>* filtered = nullptr) const;

  /// Backpropagated gradient of forward() with respect to w.
  [[nodiscard]] Vec backward(const Vec& w, const Vec& x, const Vec* eta = nullptr,
                             const std::vector<int>* filtered = nullptr) const;

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;  // index 1..p
  int total_ = 0;
};

/// Deep network predictor; gradient by backpropagation, Hessian by central
/// differences of the gradient.
Predictor deep_nn_predictor(const std::vector<int>& layer_dims);

/// Embeds shallow parameters (a, b) into the deep layout [d_in, n, 1] with
/// zero biases.
Vec shallow_to_deep_params(const Vec& shallow_w, int n_hidden, int d_in);

/// Interpolating OLM dataset: random w* = (u*, v*) and inputs, labels
/// y_i = f_{w*}(x_i). Inputs are rescaled so that the largest Hessian
/// eigenvalue of the MSE loss at w* equals `lambda_max`.
struct InterpolatingProblem {
  Dataset data;
  Vec w_star;
};
InterpolatingProblem make_interpolating_olm(int n_samples, int d_in,
                                            std::uint64_t seed,
                                            double lambda_max = 4.0);

/// Interpolating shallow-network data: signed output weights, Gaussian
/// first-layer weights and inputs (std 1.5), labels y_i = f_{w*}(x_i).
InterpolatingProblem make_interpolating_shallow(int n_samples, int d_in, int n_hidden,
                                                std::uint64_t seed);

}  // namespace nglab
