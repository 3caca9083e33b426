#include "msgf/params.hpp"

#include <cmath>

#include "msgf/error.hpp"

namespace msgf {

Var ParamStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw ContractError("parameter '" + name + "' registered twice");
  Var v = Var::leaf(std::move(init));
  params_.push_back({name, v});
  return v;
}

const Var& ParamStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.var;
  throw ContractError("unknown parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.numel();
  return n;
}

Tensor Initializer::normal(Shape shape, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = dist(rng_);
  return t;
}

Tensor Initializer::lecun(Shape shape, std::size_t fan_in) {
  return normal(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

GruParams make_gru_params(ParamStore& store, Initializer& init, const std::string& prefix,
                          std::size_t d, std::size_t e) {
  GruParams p;
  p.w_z = store.add(prefix + ".w_z", init.lecun({d, e}, e));
  p.w_r = store.add(prefix + ".w_r", init.lecun({d, e}, e));
  p.w_h = store.add(prefix + ".w_h", init.lecun({d, e}, e));
  p.u_z = store.add(prefix + ".u_z", init.lecun({d, d}, d));
  p.u_r = store.add(prefix + ".u_r", init.lecun({d, d}, d));
  p.u_h = store.add(prefix + ".u_h", init.lecun({d, d}, d));
  p.b_z = store.add(prefix + ".b_z", Tensor({d}));
  p.b_r = store.add(prefix + ".b_r", Tensor({d}));
  p.b_h = store.add(prefix + ".b_h", Tensor({d}));
  return p;
}

}  // namespace msgf
