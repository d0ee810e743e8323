#pragma once

#include <stdexcept>
#include <string>

namespace topm {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// m outside [1, k-1].
class InvalidM : public Error {
 public:
  InvalidM(int m, int k)
      : Error("m must be in [1, k-1], got m=" + std::to_string(m) +
              " with k=" + std::to_string(k)) {}
};

// A statistic was requested before enough observations exist to define it.
class DegenerateState : public Error {
 public:
  explicit DegenerateState(const std::string& what) : Error(what) {}
};

class BudgetTooSmall : public Error {
 public:
  BudgetTooSmall(unsigned long long budget, unsigned long long minimum)
      : Error("budget " + std::to_string(budget) + " below minimum " +
              std::to_string(minimum)) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

class ZeroRatio : public Error {
 public:
  explicit ZeroRatio(const std::string& what) : Error(what) {}
};

class ZeroFlow : public Error {
 public:
  explicit ZeroFlow(const std::string& what) : Error(what) {}
};

class GridTooLarge : public Error {
 public:
  explicit GridTooLarge(const std::string& what) : Error(what) {}
};

class NoConvergence : public Error {
 public:
  explicit NoConvergence(const std::string& what) : Error(what) {}
};

class SizeMismatch : public Error {
 public:
  explicit SizeMismatch(const std::string& what) : Error(what) {}
};

// Malformed input data (network fixtures, experiment configs).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

}  // namespace topm
