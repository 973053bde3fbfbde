#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlat {

// Violated precondition or failed contract inside the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, std::size_t dimension)
      : Error(what), dimension_(dimension) {}
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

}  // namespace qlat
