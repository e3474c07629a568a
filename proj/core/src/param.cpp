#include "t2t/param.hpp"

#include <algorithm>

#include "t2t/error.hpp"

namespace t2t {

Tensor ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols,
                       std::mt19937_64& rng, double scale) {
  if (find(name)) throw ContractError("parameter '" + name + "' registered twice");
  std::vector<double> v(rows * cols);
  for (double& x : v) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = (2.0 * u - 1.0) * scale;
  }
  Tensor t = Tensor::leaf(rows, cols, std::move(v));
  params_.push_back({name, t, std::vector<double>(rows * cols, 0.0)});
  return t;
}

Parameter* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

std::size_t ParamStore::num_coordinates() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

ParamStore::Snapshot ParamStore::snapshot() const {
  Snapshot s;
  for (const auto& p : params_) s[p.name] = {p.value.data().begin(), p.value.data().end()};
  return s;
}

void ParamStore::restore(const Snapshot& values) {
  for (auto& p : params_) {
    auto it = values.find(p.name);
    if (it == values.end()) throw ContractError("restore: missing parameter '" + p.name + "'");
    if (it->second.size() != p.value.size())
      throw DimensionError("restore: size mismatch for parameter '" + p.name + "'");
    std::copy(it->second.begin(), it->second.end(), p.value.mutable_data().begin());
  }
}

}  // namespace t2t
