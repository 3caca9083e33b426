#include "msgf/autograd.hpp"

#include "msgf/error.hpp"

namespace msgf {

namespace {
thread_local Tape* g_active_tape = nullptr;

void ensure_grad(VarNode& node) {
  if (node.grad.empty()) node.grad = Tensor(node.value.shape(), 0.0);
}
}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<VarNode>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Tensor& Var::grad() const {
  if (!has_grad()) throw ContractError("gradient requested on a node that has none");
  return node_->grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

Tape* active_tape() noexcept { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Var Tape::record(std::string_view op, Tensor out, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return record(op, std::move(out), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(std::string_view op, Tensor out, std::span<const Var> inputs, BackwardFn fn) {
  Var result(std::move(out), true);
  result.node()->producer = this;
  Entry e;
  e.op = std::string(op);
  e.inputs.reserve(inputs.size());
  for (const auto& in : inputs) e.inputs.push_back(in.node());
  e.output = result.node();
  e.backward = std::move(fn);
  entries_.push_back(std::move(e));
  return result;
}

void Tape::backward(const Var& loss) {
  if (!loss.defined()) throw ContractError("backward on an undefined loss");
  if (loss.numel() != 1)
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_str(loss.shape()));
  auto& root = *loss.node();
  if (root.producer != nullptr && root.producer != this)
    throw ContractError("loss was recorded on a different tape");
  if (!root.requires_grad)
    throw ContractError("loss does not depend on any differentiable input");

  ensure_grad(root);
  root.grad[0] += 1.0;

  std::vector<Tensor*> gin;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    auto& out = *it->output;
    if (out.grad.empty()) continue;  // not reachable from the loss
    gin.assign(it->inputs.size(), nullptr);
    for (std::size_t k = 0; k < it->inputs.size(); ++k) {
      auto& in = *it->inputs[k];
      if (!in.requires_grad) continue;
      ensure_grad(in);
      gin[k] = &in.grad;
    }
    it->backward(out.value, out.grad, gin);
  }

  for (auto& e : entries_)
    for (auto& in : e.inputs)
      if (in->requires_grad && in->producer == nullptr) ensure_grad(*in);
}

namespace detail {
Var emit(std::string_view op, Tensor out, std::span<const Var> inputs,
         const std::function<BackwardFn()>& make_fn) {
  Tape* tape = g_active_tape;
  bool need = false;
  for (const auto& in : inputs) need = need || in.requires_grad();
  if (tape == nullptr || !need) return Var(std::move(out), false);
  return tape->record(op, std::move(out), inputs, make_fn());
}
}  // namespace detail

}  // namespace msgf
