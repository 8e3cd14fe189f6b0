#include "nglab/schemes.hpp"

#include "nglab/regularizers.hpp"

#include <algorithm>
#include <cmath>

namespace nglab {

std::string to_string(SchemeTag t) {
  switch (t) {
    case SchemeTag::drop_connect: return "drop-connect";
    case SchemeTag::anti_pgd: return "anti-pgd";
    case SchemeTag::sgld: return "sgld";
    case SchemeTag::label_noise: return "label-noise";
    case SchemeTag::minibatch: return "minibatch";
    case SchemeTag::label_plus_minibatch: return "label+minibatch";
    case SchemeTag::dropout_olm: return "dropout-olm";
    case SchemeTag::dropout_shallow: return "dropout-shallow";
    case SchemeTag::dropout_deep: return "dropout-deep";
    case SchemeTag::modulated_quadratic: return "modulated-quadratic";
    case SchemeTag::norm_linear: return "norm-linear";
  }
  return "?";
}

std::string to_string(DegenerateClass c) {
  switch (c) {
    case DegenerateClass::nondegenerate: return "nondegenerate";
    case DegenerateClass::degenerate_quadratic: return "degenerate-quadratic";
    case DegenerateClass::trivial: return "trivial";
  }
  return "?";
}

SchemeTag scheme_tag_from_string(const std::string& s) {
  for (auto t : {SchemeTag::drop_connect, SchemeTag::anti_pgd, SchemeTag::sgld,
                 SchemeTag::label_noise, SchemeTag::minibatch, SchemeTag::label_plus_minibatch,
                 SchemeTag::dropout_olm, SchemeTag::dropout_shallow, SchemeTag::dropout_deep,
                 SchemeTag::modulated_quadratic, SchemeTag::norm_linear})
    if (to_string(t) == s) return t;
  throw ConfigError("unknown scheme '" + s + "'");
}

NoisyLoss drop_connect(const SmoothLoss& L, NoiseKind pairing) {
  NoisyLoss n;
  n.base = L;
  n.noise_dim = L.dim;
  n.tag = SchemeTag::drop_connect;
  n.id = "drop-connect";
  n.value = [L](const Vec& w, const Vec& eta) {
    return L.value(w.cwiseProduct((Vec::Ones(w.size()) + eta).eval()));
  };
  n.grad_w = [L](const Vec& w, const Vec& eta) {
    const Vec s = Vec::Ones(w.size()) + eta;
    return Vec(s.cwiseProduct(L.gradient(w.cwiseProduct(s))));
  };
  if (pairing == NoiseKind::bernoulli_dropout)
    n.analytic_reg = reg_bernoulli_dropconnect(L).value;
  else
    n.analytic_reg = reg_gaussian_dropconnect(L).value;
  return n;
}

NoisyLoss anti_pgd(const SmoothLoss& L) {
  NoisyLoss n;
  n.base = L;
  n.noise_dim = L.dim;
  n.tag = SchemeTag::anti_pgd;
  n.id = "anti-pgd";
  n.value = [L](const Vec& w, const Vec& eta) { return L.value(w + eta); };
  n.grad_w = [L](const Vec& w, const Vec& eta) { return L.gradient(w + eta); };
  n.analytic_reg = reg_anti_pgd(L).value;
  return n;
}

NoisyLoss sgld(const SmoothLoss& L) {
  NoisyLoss n;
  n.base = L;
  n.noise_dim = L.dim;
  n.tag = SchemeTag::sgld;
  n.id = "sgld";
  n.degenerate_class = DegenerateClass::degenerate_quadratic;
  n.value = [L](const Vec& w, const Vec& eta) { return L.value(w) + 0.5 * w.dot(eta); };
  n.grad_w = [L](const Vec& w, const Vec& eta) { return Vec(L.gradient(w) + 0.5 * eta); };
  const int m = L.dim;
  DegenerateParts p;
  p.f = [](const Vec& w) { return Vec(0.5 * w); };
  p.f_jac = [m](const Vec&) { return Mat(0.5 * Mat::Identity(m, m)); };
  p.g = [](const Vec&) { return 0.0; };
  n.parts = p;
  return n;
}

namespace {

void check_dims(const Predictor& pred, const Dataset& data) {
  data.validate();
  if (pred.dim_in != data.dim_in()) throw ConfigError("predictor/dataset input dims differ");
}

// Rows: grad_w f_w(x_i).
Mat predictor_jacobian(const Predictor& pred, const Dataset& data, const Vec& w) {
  Mat J(data.size(), pred.dim_w);
  for (int i = 0; i < data.size(); ++i) J.row(i) = pred.grad_w(w, data.input(i)).transpose();
  return J;
}

}  // namespace

NoisyLoss label_noise(const Predictor& pred, const Dataset& data) {
  check_dims(pred, data);
  const int N = data.size();
  NoisyLoss n;
  n.base = mse_empirical_loss(pred, data);
  n.noise_dim = N;
  n.tag = SchemeTag::label_noise;
  n.id = "label-noise";
  n.degenerate_class = DegenerateClass::degenerate_quadratic;
  n.value = [pred, data, N](const Vec& w, const Vec& eta) {
    const Vec r = residuals(pred, data, w) - eta;
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += r(i) * r(i);
    return acc / N;
  };
  n.grad_w = [pred, data, N](const Vec& w, const Vec& eta) {
    const Vec r = residuals(pred, data, w) - eta;
    Vec g = Vec::Zero(pred.dim_w);
    for (int i = 0; i < N; ++i) g += r(i) * pred.grad_w(w, data.input(i));
    return Vec(2.0 / N * g);
  };
  DegenerateParts p;
  p.f = [pred, data, N](const Vec& w) { return Vec(-2.0 / N * residuals(pred, data, w)); };
  p.f_jac = [pred, data, N](const Vec& w) {
    return Mat(-2.0 / N * predictor_jacobian(pred, data, w));
  };
  p.g = [N](const Vec& eta) { return eta.squaredNorm() / N; };
  n.parts = p;
  return n;
}

NoisyLoss minibatch(const Predictor& pred, const Dataset& data, int m_expect) {
  check_dims(pred, data);
  const int N = data.size();
  if (m_expect < 1 || m_expect > N) throw ConfigError("minibatch: m_expect must be in [1, N]");
  NoisyLoss n;
  n.base = mse_empirical_loss(pred, data);
  n.noise_dim = N;
  n.tag = SchemeTag::minibatch;
  n.id = "minibatch";
  n.degenerate_class = DegenerateClass::degenerate_quadratic;
  n.builtin_noise = minibatch_noise(N, m_expect);
  n.value = [pred, data, N](const Vec& w, const Vec& eta) {
    const Vec r = residuals(pred, data, w);
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += (1.0 + eta(i)) * r(i) * r(i);
    return acc / N;
  };
  n.grad_w = [pred, data, N](const Vec& w, const Vec& eta) {
    Vec g = Vec::Zero(pred.dim_w);
    for (int i = 0; i < N; ++i) {
      const double c = 1.0 + eta(i);
      if (c == 0.0) continue;
      const Vec x = data.input(i);
      g += c * (pred.predict(w, x) - data.labels(i)) * pred.grad_w(w, x);
    }
    return Vec(2.0 / N * g);
  };
  DegenerateParts p;
  p.f = [pred, data, N](const Vec& w) {
    return Vec(residuals(pred, data, w).array().square() / N);
  };
  p.f_jac = [pred, data, N](const Vec& w) {
    const Vec r = residuals(pred, data, w);
    Mat J = predictor_jacobian(pred, data, w);
    return Mat(2.0 / N * (r.asDiagonal() * J));
  };
  p.g = [](const Vec&) { return 0.0; };
  n.parts = p;
  return n;
}

NoisyLoss label_plus_minibatch(const Predictor& pred, const Dataset& data) {
  check_dims(pred, data);
  const int N = data.size();
  NoisyLoss n;
  n.base = mse_empirical_loss(pred, data);
  n.noise_dim = 2 * N;
  n.tag = SchemeTag::label_plus_minibatch;
  n.id = "label+minibatch";
  n.degenerate_class = DegenerateClass::degenerate_quadratic;
  n.value = [pred, data, N](const Vec& w, const Vec& eta) {
    const Vec r = residuals(pred, data, w);
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      const double e = r(i) - eta(i);
      acc += (1.0 + eta(N + i)) * e * e;
    }
    return acc / N;
  };
  n.grad_w = [pred, data, N](const Vec& w, const Vec& eta) {
    Vec g = Vec::Zero(pred.dim_w);
    for (int i = 0; i < N; ++i) {
      const double c = 1.0 + eta(N + i);
      if (c == 0.0) continue;
      const Vec x = data.input(i);
      g += c * (pred.predict(w, x) - data.labels(i) - eta(i)) * pred.grad_w(w, x);
    }
    return Vec(2.0 / N * g);
  };
  DegenerateParts p;
  p.f = [pred, data, N](const Vec& w) {
    const Vec r = residuals(pred, data, w);
    Vec f(2 * N);
    f.head(N) = -2.0 / N * r;
    f.tail(N) = r.array().square().matrix() / N;
    return f;
  };
  p.f_jac = [pred, data, N](const Vec& w) {
    const Vec r = residuals(pred, data, w);
    const Mat J = predictor_jacobian(pred, data, w);
    Mat F(2 * N, pred.dim_w);
    F.topRows(N) = -2.0 / N * J;
    F.bottomRows(N) = 2.0 / N * (r.asDiagonal() * J);
    return F;
  };
  p.H = [pred, data, N](const Vec& w) {
    const Vec r = residuals(pred, data, w);
    Mat H = Mat::Zero(2 * N, 2 * N);
    for (int i = 0; i < N; ++i) H(i, N + i) = H(N + i, i) = -2.0 / N * r(i);
    return H;
  };
  p.H_grads = [pred, data, N](const Vec& w) {
    std::vector<DegenerateParts::HEntryGrad> out;
    out.reserve(N);
    for (int i = 0; i < N; ++i)
      out.push_back({i, N + i, Vec(-2.0 / N * pred.grad_w(w, data.input(i)))});
    return out;
  };
  p.g = [N](const Vec& eta) {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += eta(i) * eta(i) * (1.0 + eta(N + i));
    return acc / N;
  };
  n.parts = p;
  return n;
}

NoisyLoss dropout_olm(int d_in, const Dataset& data) {
  const Predictor pred = olm_predictor(d_in);
  check_dims(pred, data);
  const int N = data.size();
  NoisyLoss n;
  n.base = mse_empirical_loss(pred, data);
  n.noise_dim = d_in;
  n.tag = SchemeTag::dropout_olm;
  n.id = "dropout-olm";
  n.value = [pred, data, N](const Vec& w, const Vec& eta) {
    const Vec s = Vec::Ones(eta.size()) + eta;
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      const double r = pred.predict(w, data.input(i).cwiseProduct(s)) - data.labels(i);
      acc += r * r;
    }
    return acc / N;
  };
  n.grad_w = [pred, data, N](const Vec& w, const Vec& eta) {
    const Vec s = Vec::Ones(eta.size()) + eta;
    Vec g = Vec::Zero(pred.dim_w);
    for (int i = 0; i < N; ++i) {
      const Vec x = data.input(i).cwiseProduct(s);
      g += (pred.predict(w, x) - data.labels(i)) * pred.grad_w(w, x);
    }
    return Vec(2.0 / N * g);
  };
  n.analytic_reg = reg_olm(data).value;
  return n;
}

NoisyLoss dropout_shallow(int n_hidden, int d_in, const Dataset& data) {
  const Predictor pred = shallow_nn_predictor(n_hidden, d_in);
  check_dims(pred, data);
  const int N = data.size();
  const int nh = n_hidden;
  const int d = d_in;
  NoisyLoss n;
  n.base = mse_empirical_loss(pred, data);
  n.noise_dim = n_hidden;
  n.tag = SchemeTag::dropout_shallow;
  n.id = "dropout-shallow";
  n.value = [data, N, nh, d](const Vec& w, const Vec& eta) {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      const Vec x = data.input(i);
      double f = 0.0;
      for (int j = 0; j < nh; ++j)
        f += w(j) * (1.0 + eta(j)) * smooth_relu(w.segment(nh + j * d, d).dot(x));
      const double r = f - data.labels(i);
      acc += r * r;
    }
    return acc / N;
  };
  n.grad_w = [data, N, nh, d](const Vec& w, const Vec& eta) {
    Vec g = Vec::Zero(nh * (d + 1));
    Vec sz(nh), ds(nh);
    for (int i = 0; i < N; ++i) {
      const Vec x = data.input(i);
      double f = 0.0;
      for (int j = 0; j < nh; ++j) {
        const double z = w.segment(nh + j * d, d).dot(x);
        sz(j) = smooth_relu(z);
        ds(j) = smooth_relu_d1(z);
        f += w(j) * (1.0 + eta(j)) * sz(j);
      }
      const double r = f - data.labels(i);
      for (int j = 0; j < nh; ++j) {
        g(j) += r * (1.0 + eta(j)) * sz(j);
        g.segment(nh + j * d, d) += r * w(j) * (1.0 + eta(j)) * ds(j) * x;
      }
    }
    return Vec(2.0 / N * g);
  };
  n.analytic_reg = reg_shallow(n_hidden, data).value;
  return n;
}

NoisyLoss dropout_deep(const std::vector<int>& layer_dims, const Dataset& data,
                       std::vector<int> filtered_layers) {
  const DeepLayout layout(layer_dims);
  const Predictor pred = deep_nn_predictor(layer_dims);
  check_dims(pred, data);
  if (filtered_layers.empty())
    for (int k = 1; k <= layout.num_layers(); ++k) filtered_layers.push_back(k);
  std::sort(filtered_layers.begin(), filtered_layers.end());
  int d = 0;
  for (int k : filtered_layers) {
    if (k < 1 || k > layout.num_layers()) throw ConfigError("dropout_deep: bad layer index");
    d += layout.input_width(k);
  }
  const int N = data.size();
  NoisyLoss n;
  n.base = mse_empirical_loss(pred, data);
  n.noise_dim = d;
  n.tag = SchemeTag::dropout_deep;
  n.id = "dropout-deep";
  n.value = [layout, data, N, filtered_layers](const Vec& w, const Vec& eta) {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      const double r = layout.forward(w, data.input(i), &eta, &filtered_layers) - data.labels(i);
      acc += r * r;
    }
    return acc / N;
  };
  n.grad_w = [layout, data, N, filtered_layers](const Vec& w, const Vec& eta) {
    Vec g = Vec::Zero(layout.dim_w());
    for (int i = 0; i < N; ++i) {
      const Vec x = data.input(i);
      const double r = layout.forward(w, x, &eta, &filtered_layers) - data.labels(i);
      g += r * layout.backward(w, x, &eta, &filtered_layers);
    }
    return Vec(2.0 / N * g);
  };
  return n;
}

NoisyLoss modulated_quadratic(const SmoothLoss& L, std::function<double(const Vec&)> a,
                              std::function<Vec(const Vec&)> grad_a) {
  NoisyLoss n;
  n.base = L;
  n.noise_dim = 1;
  n.tag = SchemeTag::modulated_quadratic;
  n.id = "modulated-quadratic";
  n.value = [L, a](const Vec& w, const Vec& eta) {
    return L.value(w) + 0.5 * a(w) * eta(0) * eta(0);
  };
  n.grad_w = [L, grad_a](const Vec& w, const Vec& eta) {
    return Vec(L.gradient(w) + 0.5 * eta(0) * eta(0) * grad_a(w));
  };
  n.analytic_reg = [a](const Vec& w) { return 0.5 * a(w); };
  return n;
}

NoisyLoss cosine_modulated_quadratic(const SmoothLoss& L) {
  return modulated_quadratic(
      L, [](const Vec& w) { return 1.0 - 0.7 * std::cos(2.0 * w(0)); },
      [](const Vec& w) {
        Vec g = Vec::Zero(w.size());
        g(0) = 1.4 * std::sin(2.0 * w(0));
        return g;
      });
}

NoisyLoss norm_linear(const SmoothLoss& L) {
  NoisyLoss n;
  n.base = L;
  n.noise_dim = 1;
  n.tag = SchemeTag::norm_linear;
  n.id = "norm-linear";
  n.degenerate_class = DegenerateClass::degenerate_quadratic;
  n.value = [L](const Vec& w, const Vec& eta) {
    return L.value(w) + 0.5 * w.squaredNorm() * eta(0);
  };
  n.grad_w = [L](const Vec& w, const Vec& eta) { return Vec(L.gradient(w) + eta(0) * w); };
  DegenerateParts p;
  p.f = [](const Vec& w) {
    Vec f(1);
    f(0) = 0.5 * w.squaredNorm();
    return f;
  };
  p.f_jac = [](const Vec& w) { return Mat(w.transpose()); };
  p.g = [](const Vec&) { return 0.0; };
  n.parts = p;
  return n;
}

}  // namespace nglab
