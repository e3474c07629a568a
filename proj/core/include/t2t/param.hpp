#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "t2t/tensor.hpp"

namespace t2t {

/// A named trainable tensor plus its Adagrad squared-gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> accumulator;
};

/// Owns every trainable tensor of a model, in registration order.
class ParamStore {
 public:
  /// Registers a parameter drawn uniformly from [-scale, scale].
  Tensor add(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng,
             double scale = 0.1);

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  void zero_grad();
  std::size_t num_coordinates() const;

  using Snapshot = std::map<std::string, std::vector<double>>;
  Snapshot snapshot() const;
  /// Overwrites values in place; every name in the store must be present.
  void restore(const Snapshot& values);

 private:
  std::vector<Parameter> params_;
};

}  // namespace t2t
