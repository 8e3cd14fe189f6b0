#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nglab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error hierarchy. The CLI maps ConfigError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class OffManifoldError : public Error {
 public:
  using Error::Error;
};

class NotAttractedError : public Error {
 public:
  using Error::Error;
};

class AmbiguousGapError : public Error {
 public:
  using Error::Error;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

class NotAvailableError : public Error {
 public:
  using Error::Error;
};

class SchemeError : public Error {
 public:
  using Error::Error;
};

class StiffnessError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace nglab
