#include "tensor.hpp"

#include <algorithm>

#include "op_common.hpp"

namespace ffinet {

namespace {
thread_local bool g_finite_checks = false;
thread_local long g_rfft2_calls = 0;
}  // namespace

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks_enabled() { return g_finite_checks; }
long rfft2_calls() { return g_rfft2_calls; }
void reset_rfft2_calls() { g_rfft2_calls = 0; }

namespace detail {
void bump_rfft2_calls() { ++g_rfft2_calls; }
}  // namespace detail

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape) {
  check_dim(same_shape(a.shape(), b.shape()),
            "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<S> out(a.shape());
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  detail::check_finite(out, "add");
  if (detail::want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape) {
  check_dim(same_shape(a.shape(), b.shape()),
            "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<S> out(a.shape());
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  detail::check_finite(out, "sub");
  if (detail::want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape) {
  check_dim(same_shape(a.shape(), b.shape()),
            "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<S> out(a.shape());
  auto av = a.data(), bv = b.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  detail::check_finite(out, "mul");
  if (detail::want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      auto g = out.grad();
      auto av2 = a.data(), bv2 = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S s, Tape<S>* tape) {
  Tensor<S> out(a.shape());
  auto av = a.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * s;
  detail::check_finite(out, "scale");
  if (detail::want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record([a, out, s]() mutable {
      auto g = out.grad();
      auto ga = a.grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a, Tape<S>* tape) {
  S acc = S(0);
  for (S v : a.data()) acc += v;
  Tensor<S> out = Tensor<S>::scalar(acc);
  detail::check_finite(out, "sum");
  if (detail::want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record([a, out]() mutable {
      S g = out.grad()[0];
      auto ga = a.grad();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a, Tape<S>* tape) {
  S acc = S(0);
  for (S v : a.data()) acc += v;
  S inv_n = S(1) / static_cast<S>(a.numel());
  Tensor<S> out = Tensor<S>::scalar(acc * inv_n);
  detail::check_finite(out, "mean");
  if (detail::want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record([a, out, inv_n]() mutable {
      S g = out.grad()[0] * inv_n;
      auto ga = a.grad();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

template <typename S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape) {
  check_dim(same_shape(a.shape(), b.shape()),
            "mse: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto av = a.data(), bv = b.data();
  S acc = S(0);
  for (size_t i = 0; i < av.size(); ++i) {
    S d = av[i] - bv[i];
    acc += d * d;
  }
  S inv_n = S(1) / static_cast<S>(a.numel());
  Tensor<S> out = Tensor<S>::scalar(acc * inv_n);
  detail::check_finite(out, "mse");
  if (detail::want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out, inv_n]() mutable {
      S g = out.grad()[0] * S(2) * inv_n;
      auto av2 = a.data(), bv2 = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g * (av2[i] - bv2[i]);
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g * (av2[i] - bv2[i]);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape, Tape<S>* tape) {
  check_dim(shape_numel(shape) == a.numel(),
            "reshape: element count mismatch, " + shape_str(a.shape()) + " to " + shape_str(shape));
  Tensor<S> out(std::move(shape));
  auto av = a.data();
  auto ov = out.data();
  std::copy(av.begin(), av.end(), ov.begin());
  if (detail::want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record([a, out]() mutable {
      auto g = out.grad();
      auto ga = a.grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> concat_channels(std::span<const Tensor<S>> parts, Tape<S>* tape) {
  check_dim(!parts.empty(), "concat_channels: no inputs");
  const Shape& s0 = parts[0].shape();
  check_dim(s0.size() == 4, "concat_channels: expects 4-D tensors");
  long total_c = 0;
  for (const Tensor<S>& p : parts) {
    check_dim(p.dim() == 4 && p.size(0) == s0[0] && p.size(2) == s0[2] && p.size(3) == s0[3],
              "concat_channels: incompatible shapes");
    total_c += p.size(1);
  }
  long b_count = s0[0], hw = s0[2] * s0[3];
  Tensor<S> out(Shape{b_count, total_c, s0[2], s0[3]});
  auto ov = out.data();
  bool grads = false;
  for (const Tensor<S>& p : parts) grads = grads || p.requires_grad();
  long c_off = 0;
  for (const Tensor<S>& p : parts) {
    long pc = p.size(1);
    auto pv = p.data();
    for (long b = 0; b < b_count; ++b)
      std::copy_n(pv.data() + b * pc * hw, pc * hw, ov.data() + (b * total_c + c_off) * hw);
    c_off += pc;
  }
  if (tape && grads) {
    out.set_requires_grad(true);
    std::vector<Tensor<S>> held(parts.begin(), parts.end());
    tape->record([held, out, b_count, total_c, hw]() mutable {
      auto g = out.grad();
      long c_off2 = 0;
      for (Tensor<S>& p : held) {
        long pc = p.size(1);
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (long b = 0; b < b_count; ++b) {
            const S* src = g.data() + (b * total_c + c_off2) * hw;
            S* dst = gp.data() + b * pc * hw;
            for (long i = 0; i < pc * hw; ++i) dst[i] += src[i];
          }
        }
        c_off2 += pc;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> slice_channels(const Tensor<S>& a, long start, long count, Tape<S>* tape) {
  check_dim(a.dim() == 4, "slice_channels: expects a 4-D tensor");
  long c = a.size(1);
  check_dim(start >= 0 && count > 0 && start + count <= c, "slice_channels: range out of bounds");
  long b_count = a.size(0), hw = a.size(2) * a.size(3);
  Tensor<S> out(Shape{b_count, count, a.size(2), a.size(3)});
  auto av = a.data();
  auto ov = out.data();
  for (long b = 0; b < b_count; ++b)
    std::copy_n(av.data() + (b * c + start) * hw, count * hw, ov.data() + b * count * hw);
  if (detail::want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record([a, out, start, count, b_count, c, hw]() mutable {
      auto g = out.grad();
      auto ga = a.grad();
      for (long b = 0; b < b_count; ++b) {
        const S* src = g.data() + b * count * hw;
        S* dst = ga.data() + (b * c + start) * hw;
        for (long i = 0; i < count * hw; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& a, S slope, Tape<S>* tape) {
  check_config(slope > S(0) && slope < S(1), "leaky_relu: slope must be in (0,1)");
  Tensor<S> out(a.shape());
  auto av = a.data();
  auto ov = out.data();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] >= S(0) ? av[i] : slope * av[i];
  detail::check_finite(out, "leaky_relu");
  if (detail::want_grad(tape, {&a})) {
    out.set_requires_grad(true);
    tape->record([a, out, slope]() mutable {
      auto g = out.grad();
      auto av2 = a.data();
      auto ga = a.grad();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (av2[i] >= S(0) ? S(1) : slope);
    });
  }
  return out;
}

#define FFINET_INSTANTIATE_ELEMENTWISE(S)                                                 \
  template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&, Tape<S>*);                \
  template Tensor<S> sub<S>(const Tensor<S>&, const Tensor<S>&, Tape<S>*);                \
  template Tensor<S> mul<S>(const Tensor<S>&, const Tensor<S>&, Tape<S>*);                \
  template Tensor<S> scale<S>(const Tensor<S>&, S, Tape<S>*);                             \
  template Tensor<S> sum<S>(const Tensor<S>&, Tape<S>*);                                  \
  template Tensor<S> mean<S>(const Tensor<S>&, Tape<S>*);                                 \
  template Tensor<S> mse<S>(const Tensor<S>&, const Tensor<S>&, Tape<S>*);                \
  template Tensor<S> reshape<S>(const Tensor<S>&, Shape, Tape<S>*);                       \
  template Tensor<S> concat_channels<S>(std::span<const Tensor<S>>, Tape<S>*);            \
  template Tensor<S> slice_channels<S>(const Tensor<S>&, long, long, Tape<S>*);           \
  template Tensor<S> leaky_relu<S>(const Tensor<S>&, S, Tape<S>*);

FFINET_INSTANTIATE_ELEMENTWISE(float)
FFINET_INSTANTIATE_ELEMENTWISE(double)

}  // namespace ffinet
