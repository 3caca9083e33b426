#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msgf/autograd.hpp"

namespace msgf {

struct NamedParam {
  std::string name;
  Var var;
};

/// Owns the learnable tensors of a model in registration order. Each name is
/// registered exactly once; the order is the optimizer and checkpoint order.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init);
  const std::vector<NamedParam>& params() const noexcept { return params_; }
  std::vector<NamedParam>& params() noexcept { return params_; }
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  void zero_grad();
  std::size_t total_size() const;

 private:
  std::vector<NamedParam> params_;
};

/// Seeded initializer. Draw order is the call order, so models built from the
/// same seed and config are bit-identical.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  // N(0, stddev^2) entries.
  Tensor normal(Shape shape, double stddev);
  // N(0, 1/fan_in) entries.
  Tensor lecun(Shape shape, std::size_t fan_in);
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// GRU weights under `prefix`: W* [d x e], U* [d x d] LeCun-normal, zero biases.
GruParams make_gru_params(ParamStore& store, Initializer& init, const std::string& prefix,
                          std::size_t d, std::size_t e);

}  // namespace msgf
