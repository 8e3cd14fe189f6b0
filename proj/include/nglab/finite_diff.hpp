#pragma once

#include "nglab/types.hpp"

#include <functional>

namespace nglab::fd {

using ScalarFn = std::function<double(const Vec&)>;
using VectorFn = std::function<Vec(const Vec&)>;

inline constexpr double kGradientStep = 1e-5;
inline constexpr double kHessianStep = 1e-3;

/// Central-difference gradient, O(h^2).
Vec gradient(const ScalarFn& f, const Vec& x, double h = kGradientStep);

/// Hessian from second differences of f, symmetrized.
Mat hessian(const ScalarFn& f, const Vec& x, double h = kHessianStep);

/// Jacobian J(i, j) = d F_i / d x_j by central differences.
Mat jacobian(const VectorFn& F, const Vec& x, double h = kGradientStep);

/// Hessian as the symmetrized central-difference Jacobian of a gradient field.
Mat hessian_from_gradient(const VectorFn& grad, const Vec& x,
                          double h = kGradientStep);

/// Laplacian sum_i (f(x+h e_i) + f(x-h e_i) - 2 f(x)) / h^2.
double laplacian(const ScalarFn& f, const Vec& x, double h = kHessianStep);

}  // namespace nglab::fd
