#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace ffinet {

using Shape = std::vector<long>;

inline long shape_numel(const Shape& s) {
  long n = 1;
  for (long e : s) n *= e;
  return n;
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

template <typename S>
struct TensorImpl {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;  // same length as data when requires_grad
  bool requires_grad = false;
};

// Dense row-major tensor. Copying a Tensor aliases the underlying buffer;
// use clone() for a deep copy. Gradients live on the tensor itself and are
// filled in by Tape::backward.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() : impl_(std::make_shared<TensorImpl<S>>()) {}

  explicit Tensor(Shape shape) : impl_(std::make_shared<TensorImpl<S>>()) {
    for (long e : shape) check_dim(e > 0, "tensor extents must be positive, got " + shape_str(shape));
    impl_->shape = std::move(shape);
    impl_->data.assign(static_cast<size_t>(shape_numel(impl_->shape)), S(0));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, S value) {
    Tensor t(std::move(shape));
    for (S& v : t.impl_->data) v = value;
    return t;
  }

  static Tensor scalar(S value) {
    Tensor t(Shape{1});
    t.impl_->data[0] = value;
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> values) {
    Tensor t;
    check_dim(shape_numel(shape) == static_cast<long>(values.size()),
              "Tensor::from: value count does not match shape " + shape_str(shape));
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(values);
    return t;
  }

  static Tensor uniform(Shape shape, Rng& rng, S lo, S hi) {
    Tensor t(std::move(shape));
    for (S& v : t.impl_->data) v = static_cast<S>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
  }

  const Shape& shape() const { return impl_->shape; }
  long dim() const { return static_cast<long>(impl_->shape.size()); }
  long size(long i) const {
    check_dim(i >= 0 && i < dim(), "size(): axis out of range");
    return impl_->shape[static_cast<size_t>(i)];
  }
  long numel() const { return static_cast<long>(impl_->data.size()); }
  bool defined() const { return !impl_->data.empty(); }

  std::span<S> data() { return {impl_->data.data(), impl_->data.size()}; }
  std::span<const S> data() const { return {impl_->data.data(), impl_->data.size()}; }

  S item() const {
    check(numel() == 1, ErrKind::contract, "item(): tensor is not a scalar");
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }

  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    if (v)
      impl_->grad.assign(impl_->data.size(), S(0));
    else
      impl_->grad.clear();
    return *this;
  }

  std::span<S> grad() {
    check(impl_->requires_grad, ErrKind::contract, "grad(): tensor does not require grad");
    return {impl_->grad.data(), impl_->grad.size()};
  }
  std::span<const S> grad() const {
    check(impl_->requires_grad, ErrKind::contract, "grad(): tensor does not require grad");
    return {impl_->grad.data(), impl_->grad.size()};
  }

  void zero_grad() {
    for (S& g : impl_->grad) g = S(0);
  }

  Tensor clone() const {
    Tensor t;
    t.impl_->shape = impl_->shape;
    t.impl_->data = impl_->data;
    return t;
  }

  const TensorImpl<S>* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<TensorImpl<S>> impl_;
};

// Half-spectrum of a real 2-D FFT over the last two axes; real/imag are
// carried as separate real tensors of identical shape [..., H, floor(W/2)+1].
template <typename S>
struct ComplexSpectrum {
  Tensor<S> real;
  Tensor<S> imag;
  long src_width = 0;
};

// Reverse-mode tape: ops append a backward step at execution time and
// backward() replays them in strict reverse order. Confined to one logical
// thread per forward/backward pass.
template <typename S>
class Tape {
 public:
  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  long size() const { return static_cast<long>(steps_.size()); }

  void backward(Tensor<S>& loss) {
    check(loss.numel() == 1, ErrKind::contract, "backward: loss must be a scalar");
    check(loss.requires_grad(), ErrKind::contract, "backward: loss was not produced through this tape");
    loss.grad()[0] += S(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
  }

 private:
  std::vector<std::function<void()>> steps_;
};

// ---- elementwise / shape ops ----------------------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> scale(const Tensor<S>& a, S s, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> sum(const Tensor<S>& a, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> mean(const Tensor<S>& a, Tape<S>* tape = nullptr);
// mean over all elements of squared difference
template <typename S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape, Tape<S>* tape = nullptr);
// concatenation / slicing along axis 1 of 4-D tensors [B, C, H, W]
template <typename S>
Tensor<S> concat_channels(std::span<const Tensor<S>> parts, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> slice_channels(const Tensor<S>& a, long start, long count, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& a, S slope, Tape<S>* tape = nullptr);

// ---- layer ops -------------------------------------------------------------

// Cross-correlation with zero padding: in [B,Cin,H,W], w [Cout,Cin/g,kh,kw].
template <typename S>
Tensor<S> conv2d(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>* bias, long stride,
                 long padding, long groups, Tape<S>* tape = nullptr);

// Adjoint of conv2d: in [B,Cin,H,W], w [Cin,Cout/g,kh,kw].
// Output extent = (H-1)*stride - 2*padding + kh + output_padding.
template <typename S>
Tensor<S> conv_transpose2d(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>* bias,
                           long stride, long padding, long output_padding, long groups,
                           Tape<S>* tape = nullptr);

template <typename S>
Tensor<S> group_norm(const Tensor<S>& in, long num_groups, const Tensor<S>& gamma,
                     const Tensor<S>& beta, S eps, Tape<S>* tape = nullptr);

// Real 2-D FFT over the last two axes, unnormalized, keeping floor(W/2)+1
// columns. irfft2 is its exact inverse with 1/(H*W) normalization.
template <typename S>
ComplexSpectrum<S> rfft2(const Tensor<S>& in, Tape<S>* tape = nullptr);
template <typename S>
Tensor<S> irfft2(const ComplexSpectrum<S>& spec, long out_width, Tape<S>* tape = nullptr);

// ---- diagnostics -----------------------------------------------------------

// When on, every op checks its output for NaN/Inf and throws ErrKind::numeric.
void set_finite_checks(bool on);
bool finite_checks_enabled();

// Counts forward rfft2 executions on this thread (instrumentation).
long rfft2_calls();
void reset_rfft2_calls();

// Central finite differences vs tape gradients. `fn` must build the scalar
// loss through the given tape (nullptr means plain evaluation) and be
// deterministic. Returns max over probed coordinates of
// |analytic - numeric| / max(1, |numeric|). max_coords_per_tensor < 0 probes
// every coordinate; otherwise an evenly strided deterministic subset.
template <typename S>
double grad_check(const std::function<Tensor<S>(Tape<S>*)>& fn, std::span<Tensor<S>> wrt,
                  double eps, long max_coords_per_tensor = -1);

}  // namespace ffinet
