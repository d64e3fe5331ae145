#include <complex>
#include <vector>

#include "fft.hpp"
#include "op_common.hpp"
#include "tensor.hpp"

namespace ffinet {

namespace {

using cd = std::complex<double>;

long half_width(long w) { return w / 2 + 1; }

// multiplicity of a retained column in the full spectrum (2 when its
// Hermitian mirror column was dropped, 1 for the self-mirrored columns)
long column_weight(long col, long w) {
  if (col == 0) return 1;
  if (w % 2 == 0 && col == w / 2) return 1;
  return 2;
}

// full unnormalized 2-D FFT of one slab held in buf (row-major H x W)
void fft2_inplace(cd* buf, long h, long w, bool inverse) {
  for (long r = 0; r < h; ++r) fftk::fft(buf + r * w, w, inverse);
  if (h > 1) {
    std::vector<cd> col(static_cast<size_t>(h));
    for (long cidx = 0; cidx < w; ++cidx) {
      for (long r = 0; r < h; ++r) col[static_cast<size_t>(r)] = buf[r * w + cidx];
      fftk::fft(col.data(), h, inverse);
      for (long r = 0; r < h; ++r) buf[r * w + cidx] = col[static_cast<size_t>(r)];
    }
  }
}

// x (real, H*W) -> retained half-spectrum planes (H*Wf each), unnormalized
template <typename S>
void rfft2_slab(const S* x, long h, long w, S* out_re, S* out_im) {
  long wf = half_width(w);
  std::vector<cd> buf(static_cast<size_t>(h * w));
  for (long i = 0; i < h * w; ++i) buf[static_cast<size_t>(i)] = cd(static_cast<double>(x[i]), 0.0);
  fft2_inplace(buf.data(), h, w, false);
  for (long r = 0; r < h; ++r) {
    for (long cidx = 0; cidx < wf; ++cidx) {
      out_re[r * wf + cidx] = static_cast<S>(buf[static_cast<size_t>(r * w + cidx)].real());
      out_im[r * wf + cidx] = static_cast<S>(buf[static_cast<size_t>(r * w + cidx)].imag());
    }
  }
}

// retained half-spectrum -> real slab, Hermitian extension + 1/(H*W)
template <typename S>
void irfft2_slab(const S* in_re, const S* in_im, long h, long w, S* out) {
  long wf = half_width(w);
  std::vector<cd> buf(static_cast<size_t>(h * w));
  for (long r = 0; r < h; ++r) {
    for (long cidx = 0; cidx < wf; ++cidx)
      buf[static_cast<size_t>(r * w + cidx)] =
          cd(static_cast<double>(in_re[r * wf + cidx]), static_cast<double>(in_im[r * wf + cidx]));
    for (long cidx = wf; cidx < w; ++cidx) {
      long mr = (h - r) % h;
      long mc = w - cidx;
      buf[static_cast<size_t>(r * w + cidx)] =
          cd(static_cast<double>(in_re[mr * wf + mc]), -static_cast<double>(in_im[mr * wf + mc]));
    }
  }
  fft2_inplace(buf.data(), h, w, true);
  double norm = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
  for (long i = 0; i < h * w; ++i) out[i] = static_cast<S>(buf[static_cast<size_t>(i)].real() * norm);
}

}  // namespace

template <typename S>
ComplexSpectrum<S> rfft2(const Tensor<S>& in, Tape<S>* tape) {
  const Shape& is = in.shape();
  check_dim(is.size() >= 2, "rfft2: input rank must be >= 2, got " + shape_str(is));
  long h = is[is.size() - 2], w = is[is.size() - 1];
  long wf = half_width(w);
  long slabs = in.numel() / (h * w);
  Shape os = is;
  os[os.size() - 1] = wf;

  ComplexSpectrum<S> spec;
  spec.real = Tensor<S>(os);
  spec.imag = Tensor<S>(os);
  spec.src_width = w;
  const S* x = in.data().data();
  S* re = spec.real.data().data();
  S* im = spec.imag.data().data();
  for (long s = 0; s < slabs; ++s)
    rfft2_slab(x + s * h * w, h, w, re + s * h * wf, im + s * h * wf);
  detail::bump_rfft2_calls();
  detail::check_finite(spec.real, "rfft2");
  detail::check_finite(spec.imag, "rfft2");

  if (detail::want_grad(tape, {&in})) {
    spec.real.set_requires_grad(true);
    spec.imag.set_requires_grad(true);
    Tensor<S> real = spec.real, imag = spec.imag;
    tape->record([in, real, imag, h, w, wf, slabs]() mutable {
      // adjoint: zero-pad the retained-bin gradient to the full grid and take
      // the real part of the unnormalized inverse FFT; realized through
      // irfft2_slab by cancelling its Hermitian doubling and normalization
      const S* gr = real.grad().data();
      const S* gi = imag.grad().data();
      auto gx = in.grad();
      std::vector<S> sr(static_cast<size_t>(h * wf)), si(static_cast<size_t>(h * wf));
      std::vector<S> gslab(static_cast<size_t>(h * w));
      double hw_scale = static_cast<double>(h) * static_cast<double>(w);
      for (long s = 0; s < slabs; ++s) {
        for (long r = 0; r < h; ++r) {
          for (long cidx = 0; cidx < wf; ++cidx) {
            S wgt = static_cast<S>(hw_scale / static_cast<double>(column_weight(cidx, w)));
            sr[static_cast<size_t>(r * wf + cidx)] = gr[s * h * wf + r * wf + cidx] * wgt;
            si[static_cast<size_t>(r * wf + cidx)] = gi[s * h * wf + r * wf + cidx] * wgt;
          }
        }
        irfft2_slab(sr.data(), si.data(), h, w, gslab.data());
        S* dst = gx.data() + s * h * w;
        for (long i = 0; i < h * w; ++i) dst[i] += gslab[static_cast<size_t>(i)];
      }
    });
  }
  return spec;
}

template <typename S>
Tensor<S> irfft2(const ComplexSpectrum<S>& spec, long out_width, Tape<S>* tape) {
  const Shape& rs = spec.real.shape();
  check_dim(same_shape(rs, spec.imag.shape()), "irfft2: real/imag shape mismatch");
  check_dim(rs.size() >= 2, "irfft2: spectrum rank must be >= 2");
  long h = rs[rs.size() - 2], wf = rs[rs.size() - 1];
  check_dim(half_width(out_width) == wf,
            "irfft2: out_width " + std::to_string(out_width) + " inconsistent with spectrum width " +
                std::to_string(wf));
  long w = out_width;
  long slabs = spec.real.numel() / (h * wf);
  Shape os = rs;
  os[os.size() - 1] = w;

  Tensor<S> out(os);
  const S* re = spec.real.data().data();
  const S* im = spec.imag.data().data();
  S* y = out.data().data();
  for (long s = 0; s < slabs; ++s)
    irfft2_slab(re + s * h * wf, im + s * h * wf, h, w, y + s * h * w);
  detail::check_finite(out, "irfft2");

  if (detail::want_grad(tape, {&spec.real, &spec.imag})) {
    out.set_requires_grad(true);
    Tensor<S> real = spec.real, imag = spec.imag;
    tape->record([real, imag, out, h, w, wf, slabs]() mutable {
      // adjoint: forward transform of the output gradient, column-weighted by
      // the Hermitian multiplicity and the 1/(H*W) normalization
      const S* gy = out.grad().data();
      std::vector<S> tr(static_cast<size_t>(h * wf)), ti(static_cast<size_t>(h * wf));
      double norm = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
      for (long s = 0; s < slabs; ++s) {
        rfft2_slab(gy + s * h * w, h, w, tr.data(), ti.data());
        for (long r = 0; r < h; ++r) {
          for (long cidx = 0; cidx < wf; ++cidx) {
            S wgt = static_cast<S>(static_cast<double>(column_weight(cidx, w)) * norm);
            long idx = s * h * wf + r * wf + cidx;
            if (real.requires_grad()) real.grad()[idx] += tr[static_cast<size_t>(r * wf + cidx)] * wgt;
            if (imag.requires_grad()) imag.grad()[idx] += ti[static_cast<size_t>(r * wf + cidx)] * wgt;
          }
        }
      }
    });
  }
  return out;
}

#define FFINET_INSTANTIATE_FFT(S)                                     \
  template ComplexSpectrum<S> rfft2<S>(const Tensor<S>&, Tape<S>*);  \
  template Tensor<S> irfft2<S>(const ComplexSpectrum<S>&, long, Tape<S>*);

FFINET_INSTANTIATE_FFT(float)
FFINET_INSTANTIATE_FFT(double)

}  // namespace ffinet
