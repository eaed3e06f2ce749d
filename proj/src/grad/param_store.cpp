#include "scenediff/grad/param_store.hpp"

#include <cmath>
#include <random>

namespace scenediff::grad {

std::uint64_t stable_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

DenseArray& ParamStore::create(const std::string& name, Shape shape, std::size_t fan_in) {
  if (arrays_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  if (fan_in == 0) throw std::invalid_argument("ParamStore: zero fan_in for " + name);
  DenseArray array(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::mt19937_64 rng(seed_ ^ stable_hash(name));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : array.values()) v = dist(rng);
  return arrays_.emplace(name, std::move(array)).first->second;
}

DenseArray& ParamStore::create_filled(const std::string& name, Shape shape, double value) {
  if (arrays_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  return arrays_.emplace(name, DenseArray(std::move(shape), value)).first->second;
}

void ParamStore::set(const std::string& name, DenseArray value) {
  auto it = arrays_.find(name);
  if (it != arrays_.end() && it->second.shape() != value.shape()) {
    throw ShapeError("ParamStore: " + name + " has shape " + to_string(it->second.shape()) +
                     ", got " + to_string(value.shape()));
  }
  arrays_.insert_or_assign(name, std::move(value));
}

const DenseArray& ParamStore::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

DenseArray& ParamStore::get_mut(const std::string& name) {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(arrays_.size());
  for (const auto& [name, _] : arrays_) out.push_back(name);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, a] : arrays_) n += a.size();
  return n;
}

}  // namespace scenediff::grad
