#pragma once

#include "nglab/losses.hpp"
#include "nglab/noise.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nglab {

enum class SchemeTag {
  drop_connect,
  anti_pgd,
  sgld,
  label_noise,
  minibatch,
  label_plus_minibatch,
  dropout_olm,
  dropout_shallow,
  dropout_deep,
  modulated_quadratic,  // L + a(w) eta^2 / 2, scalar eta
  norm_linear,          // L + |w|^2 eta / 2, scalar eta
};

enum class DegenerateClass { nondegenerate, degenerate_quadratic, trivial };

std::string to_string(SchemeTag t);
std::string to_string(DegenerateClass c);

/// Pieces of L^(w, eta) = L(w) + f(w).eta + 1/2 H(w):(eta x eta) + g(eta).
struct DegenerateParts {
  struct HEntryGrad {
    int i = 0;
    int j = 0;  // i < j
    Vec grad;   // d H_ij / dw
  };

  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> f_jac;  // d x m, row i = grad f_i
  // Optional (empty = H identically zero).
  std::function<Mat(const Vec&)> H;
  std::function<std::vector<HEntryGrad>(const Vec&)> H_grads;
  std::function<double(const Vec&)> g;
};

struct NoisyLoss {
  SmoothLoss base;
  int noise_dim = 0;
  std::function<double(const Vec& w, const Vec& eta)> value;
  std::function<Vec(const Vec& w, const Vec& eta)> grad_w;
  SchemeTag tag = SchemeTag::anti_pgd;
  DegenerateClass degenerate_class = DegenerateClass::nondegenerate;
  std::function<double(const Vec&)> analytic_reg;  // optional
  std::optional<DegenerateParts> parts;
  std::optional<NoiseFamily> builtin_noise;  // set when the scheme fixes its noise
  std::string id;
};

/// L(w (1 + eta)). `pairing` selects which closed-form regularizer is attached
/// (gaussian or bernoulli_dropout).
NoisyLoss drop_connect(const SmoothLoss& L, NoiseKind pairing = NoiseKind::gaussian);
/// L(w + eta).
NoisyLoss anti_pgd(const SmoothLoss& L);
/// L(w) + w.eta / 2.
NoisyLoss sgld(const SmoothLoss& L);
/// (1/N) sum (f_w(x_i) - y_i - eta_i)^2.
NoisyLoss label_noise(const Predictor& pred, const Dataset& data);
/// (1/N) sum (1 + eta_i) l_i(w); carries its two-point noise family.
NoisyLoss minibatch(const Predictor& pred, const Dataset& data, int m_expect);
/// (1/N) sum (1 + eta~_i)(f_w(x_i) - y_i - eta_i)^2 with eta = (eta, eta~).
NoisyLoss label_plus_minibatch(const Predictor& pred, const Dataset& data);
NoisyLoss dropout_olm(int d_in, const Dataset& data);
NoisyLoss dropout_shallow(int n_hidden, int d_in, const Dataset& data);
/// Filters on the inputs of `filtered_layers` (1-based); empty = all layers.
NoisyLoss dropout_deep(const std::vector<int>& layer_dims, const Dataset& data,
                       std::vector<int> filtered_layers = {});
/// L + a(w) eta^2 / 2 with scalar eta; Reg = a / 2.
NoisyLoss modulated_quadratic(const SmoothLoss& L, std::function<double(const Vec&)> a,
                              std::function<Vec(const Vec&)> grad_a);
/// The modulation a(w) = 1 - 0.7 cos(2 w_1).
NoisyLoss cosine_modulated_quadratic(const SmoothLoss& L);
/// L + |w|^2 eta / 2 with scalar eta.
NoisyLoss norm_linear(const SmoothLoss& L);

SchemeTag scheme_tag_from_string(const std::string& s);

}  // namespace nglab
