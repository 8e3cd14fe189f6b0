#include "nglab/losses.hpp"

#include "nglab/finite_diff.hpp"
#include "nglab/rng.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace nglab {

SmoothLoss make_fd_loss(int dim, std::function<double(const Vec&)> value, std::string id) {
  SmoothLoss L;
  L.dim = dim;
  L.value = value;
  L.gradient = [value](const Vec& w) { return fd::gradient(value, w); };
  L.hessian = [value](const Vec& w) { return fd::hessian(value, w); };
  L.mode = DerivativeMode::finite_difference;
  L.fd_step = fd::kGradientStep;
  L.id = std::move(id);
  return L;
}

void Dataset::validate() const {
  if (labels.size() == 0) throw ConfigError("dataset is empty");
  if (inputs.rows() != labels.size())
    throw ConfigError("dataset: inputs and labels have different lengths");
  if (inputs.cols() < 1) throw ConfigError("dataset: zero input dimension");
  if (!inputs.allFinite() || !labels.allFinite())
    throw ConfigError("dataset contains non-finite values");
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset has no header: " + path.string());
  int ncols = 1;
  for (char c : line) ncols += (c == ',');
  if (ncols < 2) throw ConfigError("dataset header needs x1,...,xd,y");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("dataset: bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != ncols)
      throw ConfigError("dataset: row with " + std::to_string(row.size()) +
                        " columns, expected " + std::to_string(ncols));
    rows.push_back(std::move(row));
  }
  Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(rows.size()), ncols - 1);
  d.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j + 1 < ncols; ++j) d.inputs(i, j) = rows[i][j];
    d.labels(i) = rows[i].back();
  }
  d.validate();
  return d;
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset " + path.string());
  for (int j = 0; j < data.dim_in(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  out << std::setprecision(17);
  for (int i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dim_in(); ++j) out << data.inputs(i, j) << ',';
    out << data.labels(i) << '\n';
  }
}

Mat predictor_hessian(const Predictor& pred, const Vec& w, const Vec& x) {
  if (pred.hess_w) return pred.hess_w(w, x);
  return fd::hessian_from_gradient([&](const Vec& v) { return pred.grad_w(v, x); }, w);
}

SmoothLoss ring_sine_loss(double a, double b) {
  SmoothLoss L;
  L.dim = 2;
  L.id = "ring-sine";
  L.value = [a, b](const Vec& w) {
    const double s = w.squaredNorm();
    const double F = (s - 1) * (s - 1) / ((s + 1) * (s + 1));
    return F * (1.0 + a * std::sin(b * w(0)));
  };
  L.gradient = [a, b](const Vec& w) {
    const double s = w.squaredNorm();
    const double F = (s - 1) * (s - 1) / ((s + 1) * (s + 1));
    const double F1 = 4.0 * (s - 1) / std::pow(s + 1, 3);
    const double G = 1.0 + a * std::sin(b * w(0));
    const double G1 = a * b * std::cos(b * w(0));
    Vec g = 2.0 * F1 * G * w;
    g(0) += F * G1;
    return g;
  };
  L.hessian = [a, b](const Vec& w) {
    const double s = w.squaredNorm();
    const double F = (s - 1) * (s - 1) / ((s + 1) * (s + 1));
    const double F1 = 4.0 * (s - 1) / std::pow(s + 1, 3);
    const double F2 = 8.0 * (2.0 - s) / std::pow(s + 1, 4);
    const double G = 1.0 + a * std::sin(b * w(0));
    const double G1 = a * b * std::cos(b * w(0));
    const double G2 = -a * b * b * std::sin(b * w(0));
    Mat H(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        H(i, j) = G * (4.0 * F2 * w(i) * w(j) + (i == j ? 2.0 * F1 : 0.0));
    H(0, 0) += 4.0 * G1 * F1 * w(0) + F * G2;
    H(0, 1) += 2.0 * G1 * F1 * w(1);
    H(1, 0) += 2.0 * G1 * F1 * w(1);
    return H;
  };
  return L;
}

SmoothLoss quadratic_loss(const Mat& A) {
  if (A.rows() != A.cols()) throw ConfigError("quadratic_loss: matrix not square");
  const Mat S = 0.5 * (A + A.transpose());
  SmoothLoss L;
  L.dim = static_cast<int>(S.rows());
  L.id = "quadratic";
  L.value = [S](const Vec& w) { return 0.5 * w.dot(S * w); };
  L.gradient = [S](const Vec& w) -> Vec { return S * w; };
  L.hessian = [S](const Vec&) -> Mat { return S; };
  return L;
}

Vec residuals(const Predictor& pred, const Dataset& data, const Vec& w) {
  Vec r(data.size());
  for (int i = 0; i < data.size(); ++i) r(i) = pred.predict(w, data.input(i)) - data.labels(i);
  return r;
}

SmoothLoss mse_empirical_loss(const Predictor& pred, const Dataset& data) {
  data.validate();
  if (pred.dim_in != data.dim_in())
    throw ConfigError("mse loss: predictor expects d_in=" + std::to_string(pred.dim_in) +
                      ", dataset has " + std::to_string(data.dim_in()));
  SmoothLoss L;
  L.dim = pred.dim_w;
  L.id = "mse-" + pred.id;
  const double n = data.size();
  // Sequential sum: the noise-injected schemes accumulate in the same order,
  // so L^(w, 0) reproduces this value bit for bit.
  L.value = [pred, data, n](const Vec& w) {
    const Vec r = residuals(pred, data, w);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) acc += r(i) * r(i);
    return acc / n;
  };
  L.gradient = [pred, data, n](const Vec& w) {
    Vec g = Vec::Zero(pred.dim_w);
    for (int i = 0; i < data.size(); ++i) {
      const Vec x = data.input(i);
      const double r = pred.predict(w, x) - data.labels(i);
      g += r * pred.grad_w(w, x);
    }
    return Vec(2.0 / n * g);
  };
  L.hessian = [pred, data, n](const Vec& w) {
    Mat H = Mat::Zero(pred.dim_w, pred.dim_w);
    for (int i = 0; i < data.size(); ++i) {
      const Vec x = data.input(i);
      const double r = pred.predict(w, x) - data.labels(i);
      const Vec gi = pred.grad_w(w, x);
      H += gi * gi.transpose();
      if (r != 0.0) H += r * predictor_hessian(pred, w, x);
    }
    H *= 2.0 / n;
    return Mat(0.5 * (H + H.transpose()));
  };
  return L;
}

Predictor olm_predictor(int d_in) {
  if (d_in < 1) throw ConfigError("olm_predictor: d_in must be >= 1");
  Predictor p;
  p.dim_w = 2 * d_in;
  p.dim_in = d_in;
  p.id = "olm";
  p.predict = [d_in](const Vec& w, const Vec& x) {
    double acc = 0.0;
    for (int j = 0; j < d_in; ++j) acc += (w(j) * w(j) - w(d_in + j) * w(d_in + j)) * x(j);
    return acc;
  };
  p.grad_w = [d_in](const Vec& w, const Vec& x) {
    Vec g(2 * d_in);
    for (int j = 0; j < d_in; ++j) {
      g(j) = 2.0 * w(j) * x(j);
      g(d_in + j) = -2.0 * w(d_in + j) * x(j);
    }
    return g;
  };
  p.hess_w = [d_in](const Vec&, const Vec& x) {
    Mat H = Mat::Zero(2 * d_in, 2 * d_in);
    for (int j = 0; j < d_in; ++j) {
      H(j, j) = 2.0 * x(j);
      H(d_in + j, d_in + j) = -2.0 * x(j);
    }
    return H;
  };
  return p;
}

// exp(-1/x) underflows to a subnormal/zero near x = 1/745; below that the
// rectifier and its derivatives are exactly zero.
namespace {
constexpr double kReluCutoff = 1.0 / 745.0;
}

double smooth_relu(double x) {
  if (x <= kReluCutoff) return 0.0;
  return x * std::exp(-1.0 / x);
}

double smooth_relu_d1(double x) {
  if (x <= kReluCutoff) return 0.0;
  return std::exp(-1.0 / x) * (1.0 + 1.0 / x);
}

double smooth_relu_d2(double x) {
  if (x <= kReluCutoff) return 0.0;
  return std::exp(-1.0 / x) / (x * x * x);
}

Predictor shallow_nn_predictor(int n_hidden, int d_in) {
  if (n_hidden < 1 || d_in < 1) throw ConfigError("shallow_nn_predictor: sizes must be >= 1");
  Predictor p;
  p.dim_w = n_hidden * (d_in + 1);
  p.dim_in = d_in;
  p.id = "shallow";
  const int n = n_hidden;
  const int d = d_in;
  p.predict = [n, d](const Vec& w, const Vec& x) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += w(j) * smooth_relu(w.segment(n + j * d, d).dot(x));
    return acc;
  };
  p.grad_w = [n, d](const Vec& w, const Vec& x) {
    Vec g(n * (d + 1));
    for (int j = 0; j < n; ++j) {
      const double z = w.segment(n + j * d, d).dot(x);
      g(j) = smooth_relu(z);
      g.segment(n + j * d, d) = w(j) * smooth_relu_d1(z) * x;
    }
    return g;
  };
  p.hess_w = [n, d](const Vec& w, const Vec& x) {
    Mat H = Mat::Zero(n * (d + 1), n * (d + 1));
    for (int j = 0; j < n; ++j) {
      const double z = w.segment(n + j * d, d).dot(x);
      const Vec c = smooth_relu_d1(z) * x;
      H.block(j, n + j * d, 1, d) = c.transpose();
      H.block(n + j * d, j, d, 1) = c;
      H.block(n + j * d, n + j * d, d, d) = w(j) * smooth_relu_d2(z) * x * x.transpose();
    }
    return H;
  };
  return p;
}

DeepLayout::DeepLayout(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ConfigError("deep network needs at least input and output dims");
  for (int v : dims_)
    if (v < 1) throw ConfigError("deep network: layer widths must be >= 1");
  if (dims_.back() != 1) throw ConfigError("deep network: last dim must be 1");
  offsets_.assign(dims_.size(), 0);
  int off = 0;
  for (int k = 1; k < static_cast<int>(dims_.size()); ++k) {
    offsets_[k] = off;
    off += dims_[k] * dims_[k - 1] + dims_[k];
  }
  total_ = off;
}

int DeepLayout::bias_offset(int layer) const {
  return offsets_[layer] + dims_[layer] * dims_[layer - 1];
}

namespace {

// Index of layer k's filter block inside the packed eta, or -1.
int filter_start(const std::vector<int>& filtered, const std::vector<int>& dims, int k) {
  int pos = 0;
  for (int l : filtered) {
    if (l == k) return pos;
    pos += dims[l - 1];
  }
  return -1;
}

}  // namespace

double DeepLayout::forward(const Vec& w, const Vec& x, const Vec* eta,
                           const std::vector<int>* filtered) const {
  Vec y = x;
  const int p = num_layers();
  for (int k = 1; k <= p; ++k) {
    if (eta && filtered) {
      const int s = filter_start(*filtered, dims_, k);
      if (s >= 0) y = y.cwiseProduct((Vec::Ones(y.size()) + eta->segment(s, y.size())).eval());
    }
    const int rows = dims_[k], cols = dims_[k - 1];
    Vec z(rows);
    for (int i = 0; i < rows; ++i)
      z(i) = w.segment(offsets_[k] + i * cols, cols).dot(y) + w(bias_offset(k) + i);
    if (k < p) {
      for (int i = 0; i < rows; ++i) z(i) = smooth_relu(z(i));
    }
    y = std::move(z);
  }
  return y(0);
}

Vec DeepLayout::backward(const Vec& w, const Vec& x, const Vec* eta,
                         const std::vector<int>* filtered) const {
  const int p = num_layers();
  std::vector<Vec> inputs(p + 1);  // filtered input fed to layer k
  std::vector<Vec> filt(p + 1);    // multiplicative filter (1+eta) or empty
  std::vector<Vec> pre(p + 1);     // pre-activations
  Vec y = x;
  for (int k = 1; k <= p; ++k) {
    if (eta && filtered) {
      const int s = filter_start(*filtered, dims_, k);
      if (s >= 0) {
        filt[k] = Vec::Ones(y.size()) + eta->segment(s, y.size());
        y = y.cwiseProduct(filt[k]);
      }
    }
    inputs[k] = y;
    const int rows = dims_[k], cols = dims_[k - 1];
    Vec z(rows);
    for (int i = 0; i < rows; ++i)
      z(i) = w.segment(offsets_[k] + i * cols, cols).dot(y) + w(bias_offset(k) + i);
    pre[k] = z;
    if (k < p) {
      for (int i = 0; i < rows; ++i) z(i) = smooth_relu(z(i));
    }
    y = std::move(z);
  }

  Vec g = Vec::Zero(total_);
  Vec delta = Vec::Ones(1);  // d f / d z^p
  for (int k = p; k >= 1; --k) {
    const int rows = dims_[k], cols = dims_[k - 1];
    for (int i = 0; i < rows; ++i) {
      g.segment(offsets_[k] + i * cols, cols) = delta(i) * inputs[k];
      g(bias_offset(k) + i) = delta(i);
    }
    if (k == 1) break;
    Vec up = Vec::Zero(cols);
    for (int i = 0; i < rows; ++i) up += delta(i) * w.segment(offsets_[k] + i * cols, cols);
    if (filt[k].size() > 0) up = up.cwiseProduct(filt[k]);
    Vec next(cols);
    for (int i = 0; i < cols; ++i) next(i) = up(i) * smooth_relu_d1(pre[k - 1](i));
    delta = std::move(next);
  }
  return g;
}

Predictor deep_nn_predictor(const std::vector<int>& layer_dims) {
  const DeepLayout layout(layer_dims);
  Predictor p;
  p.dim_w = layout.dim_w();
  p.dim_in = layer_dims.front();
  p.id = "deep";
  p.predict = [layout](const Vec& w, const Vec& x) { return layout.forward(w, x); };
  p.grad_w = [layout](const Vec& w, const Vec& x) { return layout.backward(w, x); };
  return p;
}

Vec shallow_to_deep_params(const Vec& shallow_w, int n_hidden, int d_in) {
  const DeepLayout layout({d_in, n_hidden, 1});
  Vec w = Vec::Zero(layout.dim_w());
  // layer 1 weights: row j is b_j
  w.segment(layout.weight_offset(1), n_hidden * d_in) = shallow_w.segment(n_hidden, n_hidden * d_in);
  w.segment(layout.weight_offset(2), n_hidden) = shallow_w.head(n_hidden);
  return w;
}

InterpolatingProblem make_interpolating_olm(int n_samples, int d_in, std::uint64_t seed,
                                            double lambda_max) {
  if (n_samples < 1 || d_in < 1) throw ConfigError("interpolating OLM: sizes must be >= 1");
  Rng rng(seed);
  InterpolatingProblem prob;
  prob.w_star.resize(2 * d_in);
  for (int j = 0; j < 2 * d_in; ++j) prob.w_star(j) = 0.5 + 0.5 * rng.uniform();
  prob.data.inputs.resize(n_samples, d_in);
  for (int i = 0; i < n_samples; ++i)
    for (int j = 0; j < d_in; ++j) prob.data.inputs(i, j) = rng.normal();

  const Predictor pred = olm_predictor(d_in);
  auto rescale = [&]() {
    prob.data.labels.resize(n_samples);
    for (int i = 0; i < n_samples; ++i)
      prob.data.labels(i) = pred.predict(prob.w_star, prob.data.input(i));
  };
  rescale();
  const Mat H = mse_empirical_loss(pred, prob.data).hessian(prob.w_star);
  const double lam = Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues().maxCoeff();
  prob.data.inputs *= std::sqrt(lambda_max / lam);
  rescale();
  return prob;
}

InterpolatingProblem make_interpolating_shallow(int n_samples, int d_in, int n_hidden,
                                                std::uint64_t seed) {
  if (n_samples < 1 || d_in < 1 || n_hidden < 1)
    throw ConfigError("interpolating shallow: sizes must be >= 1");
  Rng rng(seed);
  InterpolatingProblem prob;
  prob.w_star.resize(n_hidden * (1 + d_in));
  for (int j = 0; j < n_hidden; ++j)
    prob.w_star(j) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
  for (Eigen::Index j = n_hidden; j < prob.w_star.size(); ++j) prob.w_star(j) = rng.normal();
  prob.data.inputs.resize(n_samples, d_in);
  for (int i = 0; i < n_samples; ++i)
    for (int k = 0; k < d_in; ++k) prob.data.inputs(i, k) = 1.5 * rng.normal();
  const Predictor pred = shallow_nn_predictor(n_hidden, d_in);
  prob.data.labels.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) prob.data.labels(i) = pred.predict(prob.w_star, prob.data.input(i));
  return prob;
}

}  // namespace nglab
