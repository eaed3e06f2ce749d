#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scenediff/grad/dense_array.hpp"

namespace scenediff::grad {

/// Named learnable arrays. Shapes are fixed once created; values change only
/// through `get_mut` (single writer while training).
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Creates `name` with values uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  /// The draw depends only on (seed, name), not on creation order.
  DenseArray& create(const std::string& name, Shape shape, std::size_t fan_in);
  DenseArray& create_filled(const std::string& name, Shape shape, double value);
  /// Inserts or replaces a value verbatim (checkpoint loading).
  void set(const std::string& name, DenseArray value);

  bool contains(const std::string& name) const { return arrays_.count(name) != 0; }
  const DenseArray& get(const std::string& name) const;
  DenseArray& get_mut(const std::string& name);

  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
  std::uint64_t seed() const { return seed_; }
  const std::map<std::string, DenseArray>& arrays() const { return arrays_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, DenseArray> arrays_;
};

std::uint64_t stable_hash(const std::string& text);

}  // namespace scenediff::grad
