#pragma once

// Internal helpers shared by the op translation units.

#include <initializer_list>

#include "tensor.hpp"

namespace ffinet::detail {

void bump_rfft2_calls();

template <typename S>
bool want_grad(Tape<S>* tape, std::initializer_list<const Tensor<S>*> inputs) {
  if (!tape) return false;
  for (const Tensor<S>* t : inputs)
    if (t && t->requires_grad()) return true;
  return false;
}

template <typename S>
void check_finite(const Tensor<S>& t, const char* op) {
  if (!finite_checks_enabled()) return;
  for (S v : t.data())
    if (!std::isfinite(static_cast<double>(v)))
      fail(ErrKind::numeric, std::string(op) + ": non-finite value in output");
}

}  // namespace ffinet::detail
