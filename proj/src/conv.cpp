#include <Eigen/Core>

#include "op_common.hpp"
#include "tensor.hpp"

namespace ffinet {

namespace {

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct ConvGeom {
  long b, cin, h, w;
  long cout, kh, kw;
  long stride, pad, groups;
  long oh, ow;
};

// img [C,H,W] -> cols [C*kh*kw, OH*OW], zero padding, channel-major rows so
// that a group's rows are contiguous.
template <typename S>
void im2col(const S* img, const ConvGeom& g, S* cols) {
  long p = g.oh * g.ow;
  for (long c = 0; c < g.cin; ++c) {
    for (long ki = 0; ki < g.kh; ++ki) {
      for (long kj = 0; kj < g.kw; ++kj) {
        S* row = cols + ((c * g.kh + ki) * g.kw + kj) * p;
        for (long oy = 0; oy < g.oh; ++oy) {
          long iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(row + oy * g.ow, g.ow, S(0));
            continue;
          }
          const S* src = img + (c * g.h + iy) * g.w;
          S* dst = row + oy * g.ow;
          for (long ox = 0; ox < g.ow; ++ox) {
            long ix = ox * g.stride - g.pad + kj;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

// scatter-add of cols back into img (adjoint of im2col)
template <typename S>
void col2im_add(const S* cols, const ConvGeom& g, S* img) {
  long p = g.oh * g.ow;
  for (long c = 0; c < g.cin; ++c) {
    for (long ki = 0; ki < g.kh; ++ki) {
      for (long kj = 0; kj < g.kw; ++kj) {
        const S* row = cols + ((c * g.kh + ki) * g.kw + kj) * p;
        for (long oy = 0; oy < g.oh; ++oy) {
          long iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          S* dst = img + (c * g.h + iy) * g.w;
          const S* src = row + oy * g.ow;
          for (long ox = 0; ox < g.ow; ++ox) {
            long ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

ConvGeom conv_geometry(const Shape& in, const Shape& w, long stride, long padding, long groups) {
  check_dim(in.size() == 4, "conv2d: input must be 4-D [B,C,H,W], got " + shape_str(in));
  check_dim(w.size() == 4, "conv2d: weight must be 4-D [Cout,Cin/g,kh,kw], got " + shape_str(w));
  check_config(stride >= 1, "conv2d: stride must be positive");
  check_config(padding >= 0, "conv2d: padding must be non-negative");
  check_config(groups >= 1, "conv2d: groups must be positive");
  ConvGeom g{};
  g.b = in[0];
  g.cin = in[1];
  g.h = in[2];
  g.w = in[3];
  g.cout = w[0];
  g.kh = w[2];
  g.kw = w[3];
  g.stride = stride;
  g.pad = padding;
  g.groups = groups;
  check_dim(g.cin % groups == 0 && g.cout % groups == 0,
            "conv2d: channel counts not divisible by group count");
  check_dim(w[1] * groups == g.cin, "conv2d: weight channel extent does not match input channels");
  check_dim(g.h + 2 * g.pad >= g.kh && g.w + 2 * g.pad >= g.kw,
            "conv2d: kernel larger than padded input");
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

}  // namespace

template <typename S>
Tensor<S> conv2d(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>* bias, long stride,
                 long padding, long groups, Tape<S>* tape) {
  ConvGeom g = conv_geometry(in.shape(), w.shape(), stride, padding, groups);
  if (bias)
    check_dim(bias->dim() == 1 && bias->size(0) == g.cout, "conv2d: bias extent must equal Cout");

  long p = g.oh * g.ow;
  long ci_g = g.cin / g.groups, co_g = g.cout / g.groups;
  long k_g = ci_g * g.kh * g.kw;
  Tensor<S> out(Shape{g.b, g.cout, g.oh, g.ow});
  std::vector<S> cols(static_cast<size_t>(g.cin * g.kh * g.kw * p));
  const S* in_ptr = in.data().data();
  const S* w_ptr = w.data().data();
  S* out_ptr = out.data().data();
  for (long b = 0; b < g.b; ++b) {
    im2col(in_ptr + b * g.cin * g.h * g.w, g, cols.data());
    for (long grp = 0; grp < g.groups; ++grp) {
      ConstMatMap<S> wm(w_ptr + grp * co_g * k_g, co_g, k_g);
      ConstMatMap<S> cm(cols.data() + grp * k_g * p, k_g, p);
      MatMap<S> om(out_ptr + (b * g.cout + grp * co_g) * p, co_g, p);
      om.noalias() = wm * cm;
    }
    if (bias) {
      const S* bp = bias->data().data();
      for (long co = 0; co < g.cout; ++co) {
        S* dst = out_ptr + (b * g.cout + co) * p;
        for (long i = 0; i < p; ++i) dst[i] += bp[co];
      }
    }
  }
  detail::check_finite(out, "conv2d");

  const Tensor<S>* bias_in = bias;
  if (detail::want_grad(tape, {&in, &w, bias_in})) {
    out.set_requires_grad(true);
    Tensor<S> bias_held = bias ? *bias : Tensor<S>();
    bool has_bias = bias != nullptr;
    tape->record([in, w, bias_held, has_bias, out, g, p, ci_g, co_g, k_g]() mutable {
      const S* go = out.grad().data();
      std::vector<S> cols(static_cast<size_t>(g.cin * g.kh * g.kw * p));
      std::vector<S> dcols(static_cast<size_t>(g.cin * g.kh * g.kw * p));
      for (long b = 0; b < g.b; ++b) {
        if (w.requires_grad() || in.requires_grad())
          im2col(in.data().data() + b * g.cin * g.h * g.w, g, cols.data());
        for (long grp = 0; grp < g.groups; ++grp) {
          ConstMatMap<S> gom(go + (b * g.cout + grp * co_g) * p, co_g, p);
          if (w.requires_grad()) {
            ConstMatMap<S> cm(cols.data() + grp * k_g * p, k_g, p);
            MatMap<S> gwm(w.grad().data() + grp * co_g * k_g, co_g, k_g);
            gwm.noalias() += gom * cm.transpose();
          }
          if (in.requires_grad()) {
            ConstMatMap<S> wm(w.data().data() + grp * co_g * k_g, co_g, k_g);
            MatMap<S> dcm(dcols.data() + grp * k_g * p, k_g, p);
            dcm.noalias() = wm.transpose() * gom;
          }
        }
        if (in.requires_grad())
          col2im_add(dcols.data(), g, in.grad().data() + b * g.cin * g.h * g.w);
        if (has_bias && bias_held.requires_grad()) {
          S* gb = bias_held.grad().data();
          for (long co = 0; co < g.cout; ++co) {
            const S* src = go + (b * g.cout + co) * p;
            S acc = S(0);
            for (long i = 0; i < p; ++i) acc += src[i];
            gb[co] += acc;
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> conv_transpose2d(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>* bias,
                           long stride, long padding, long output_padding, long groups,
                           Tape<S>* tape) {
  const Shape& is = in.shape();
  const Shape& ws = w.shape();
  check_dim(is.size() == 4, "conv_transpose2d: input must be 4-D, got " + shape_str(is));
  check_dim(ws.size() == 4, "conv_transpose2d: weight must be 4-D [Cin,Cout/g,kh,kw]");
  check_config(stride >= 1 && padding >= 0, "conv_transpose2d: bad stride/padding");
  check_config(output_padding >= 0 && output_padding < stride,
               "conv_transpose2d: output_padding must be < stride");
  long b_count = is[0], cin = is[1], h = is[2], w_in = is[3];
  check_dim(ws[0] == cin, "conv_transpose2d: weight Cin extent mismatch");
  check_dim(cin % groups == 0, "conv_transpose2d: Cin not divisible by groups");
  long co_g = ws[1], kh = ws[2], kw = ws[3];
  long cout = co_g * groups;
  long oh = (h - 1) * stride - 2 * padding + kh + output_padding;
  long ow = (w_in - 1) * stride - 2 * padding + kw + output_padding;
  check_dim(oh >= 1 && ow >= 1, "conv_transpose2d: empty output");
  if (bias)
    check_dim(bias->dim() == 1 && bias->size(0) == cout,
              "conv_transpose2d: bias extent must equal Cout");

  // Scatter geometry: the output plays the role of conv2d's input.
  ConvGeom g{};
  g.b = b_count;
  g.cin = cout;
  g.h = oh;
  g.w = ow;
  g.cout = cin;
  g.kh = kh;
  g.kw = kw;
  g.stride = stride;
  g.pad = padding;
  g.groups = groups;
  g.oh = h;
  g.ow = w_in;

  long p = h * w_in;
  long ci_g = cin / groups;
  long cok = co_g * kh * kw;
  Tensor<S> out(Shape{b_count, cout, oh, ow});
  std::vector<S> cols(static_cast<size_t>(cout * kh * kw * p));
  const S* in_ptr = in.data().data();
  const S* w_ptr = w.data().data();
  S* out_ptr = out.data().data();
  for (long b = 0; b < b_count; ++b) {
    for (long grp = 0; grp < groups; ++grp) {
      // cols[(co,kh,kw), pos] = sum_ci w[ci, co, kh, kw] * in[ci, pos]
      ConstMatMap<S> wm(w_ptr + grp * ci_g * cok, ci_g, cok);
      ConstMatMap<S> im(in_ptr + (b * cin + grp * ci_g) * p, ci_g, p);
      MatMap<S> cm(cols.data() + grp * cok * p, cok, p);
      cm.noalias() = wm.transpose() * im;
    }
    S* img = out_ptr + b * cout * oh * ow;
    col2im_add(cols.data(), g, img);
    if (bias) {
      const S* bp = bias->data().data();
      for (long co = 0; co < cout; ++co) {
        S* dst = img + co * oh * ow;
        for (long i = 0; i < oh * ow; ++i) dst[i] += bp[co];
      }
    }
  }
  detail::check_finite(out, "conv_transpose2d");

  const Tensor<S>* bias_in = bias;
  if (detail::want_grad(tape, {&in, &w, bias_in})) {
    out.set_requires_grad(true);
    Tensor<S> bias_held = bias ? *bias : Tensor<S>();
    bool has_bias = bias != nullptr;
    tape->record([in, w, bias_held, has_bias, out, g, b_count, cin, cout, oh, ow, p, ci_g,
                  cok]() mutable {
      const S* go = out.grad().data();
      std::vector<S> gcols(static_cast<size_t>(cout * g.kh * g.kw * p));
      for (long b = 0; b < b_count; ++b) {
        // im2col over the output gradient reverses the scatter
        im2col(go + b * cout * oh * ow, g, gcols.data());
        for (long grp = 0; grp < g.groups; ++grp) {
          ConstMatMap<S> gcm(gcols.data() + grp * cok * p, cok, p);
          if (in.requires_grad()) {
            ConstMatMap<S> wm(w.data().data() + grp * ci_g * cok, ci_g, cok);
            MatMap<S> gim(in.grad().data() + (b * cin + grp * ci_g) * p, ci_g, p);
            gim.noalias() += wm * gcm;
          }
          if (w.requires_grad()) {
            ConstMatMap<S> im(in.data().data() + (b * cin + grp * ci_g) * p, ci_g, p);
            MatMap<S> gwm(w.grad().data() + grp * ci_g * cok, ci_g, cok);
            gwm.noalias() += im * gcm.transpose();
          }
        }
        if (has_bias && bias_held.requires_grad()) {
          S* gb = bias_held.grad().data();
          for (long co = 0; co < cout; ++co) {
            const S* src = go + (b * cout + co) * oh * ow;
            S acc = S(0);
            for (long i = 0; i < oh * ow; ++i) acc += src[i];
            gb[co] += acc;
          }
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> group_norm(const Tensor<S>& in, long num_groups, const Tensor<S>& gamma,
                     const Tensor<S>& beta, S eps, Tape<S>* tape) {
  const Shape& is = in.shape();
  check_dim(is.size() == 4, "group_norm: input must be 4-D, got " + shape_str(is));
  long b_count = is[0], c = is[1], h = is[2], w_in = is[3];
  check_dim(c % num_groups == 0, "group_norm: channels not divisible by group count");
  check_dim(gamma.dim() == 1 && gamma.size(0) == c, "group_norm: gamma extent must equal C");
  check_dim(beta.dim() == 1 && beta.size(0) == c, "group_norm: beta extent must equal C");
  check_config(eps > S(0), "group_norm: eps must be positive");

  long cg = c / num_groups;
  long gsize = cg * h * w_in;
  Tensor<S> out(is);
  std::vector<S> means(static_cast<size_t>(b_count * num_groups));
  std::vector<S> inv_stds(static_cast<size_t>(b_count * num_groups));
  const S* x = in.data().data();
  const S* gm = gamma.data().data();
  const S* bt = beta.data().data();
  S* y = out.data().data();
  for (long b = 0; b < b_count; ++b) {
    for (long grp = 0; grp < num_groups; ++grp) {
      const S* xs = x + (b * c + grp * cg) * h * w_in;
      S mean_acc = S(0);
      for (long i = 0; i < gsize; ++i) mean_acc += xs[i];
      S mu = mean_acc / static_cast<S>(gsize);
      S var_acc = S(0);
      for (long i = 0; i < gsize; ++i) {
        S d = xs[i] - mu;
        var_acc += d * d;
      }
      S inv_std = S(1) / std::sqrt(var_acc / static_cast<S>(gsize) + eps);
      means[static_cast<size_t>(b * num_groups + grp)] = mu;
      inv_stds[static_cast<size_t>(b * num_groups + grp)] = inv_std;
      S* ys = y + (b * c + grp * cg) * h * w_in;
      for (long cc = 0; cc < cg; ++cc) {
        long ch = grp * cg + cc;
        const S* xr = xs + cc * h * w_in;
        S* yr = ys + cc * h * w_in;
        for (long i = 0; i < h * w_in; ++i) yr[i] = gm[ch] * (xr[i] - mu) * inv_std + bt[ch];
      }
    }
  }
  detail::check_finite(out, "group_norm");

  if (detail::want_grad(tape, {&in, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape->record([in, gamma, beta, out, means, inv_stds, b_count, c, cg, h, w_in, num_groups,
                  gsize]() mutable {
      const S* go = out.grad().data();
      const S* x2 = in.data().data();
      const S* gm2 = gamma.data().data();
      long hw = h * w_in;
      for (long b = 0; b < b_count; ++b) {
        for (long grp = 0; grp < num_groups; ++grp) {
          S mu = means[static_cast<size_t>(b * num_groups + grp)];
          S inv_std = inv_stds[static_cast<size_t>(b * num_groups + grp)];
          const S* xs = x2 + (b * c + grp * cg) * hw;
          const S* gos = go + (b * c + grp * cg) * hw;
          // dL/dxhat = dy * gamma; reductions over the whole group
          S sum_g = S(0), sum_gx = S(0);
          for (long cc = 0; cc < cg; ++cc) {
            long ch = grp * cg + cc;
            const S* gr = gos + cc * hw;
            const S* xr = xs + cc * hw;
            for (long i = 0; i < hw; ++i) {
              S gs = gr[i] * gm2[ch];
              sum_g += gs;
              sum_gx += gs * (xr[i] - mu) * inv_std;
            }
          }
          S m1 = sum_g / static_cast<S>(gsize);
          S m2 = sum_gx / static_cast<S>(gsize);
          if (in.requires_grad()) {
            S* gi = in.grad().data() + (b * c + grp * cg) * hw;
            for (long cc = 0; cc < cg; ++cc) {
              long ch = grp * cg + cc;
              const S* gr = gos + cc * hw;
              const S* xr = xs + cc * hw;
              S* gd = gi + cc * hw;
              for (long i = 0; i < hw; ++i) {
                S xhat = (xr[i] - mu) * inv_std;
                gd[i] += inv_std * (gr[i] * gm2[ch] - m1 - xhat * m2);
              }
            }
          }
          if (gamma.requires_grad() || beta.requires_grad()) {
            for (long cc = 0; cc < cg; ++cc) {
              long ch = grp * cg + cc;
              const S* gr = gos + cc * hw;
              const S* xr = xs + cc * hw;
              S acc_g = S(0), acc_b = S(0);
              for (long i = 0; i < hw; ++i) {
                acc_g += gr[i] * (xr[i] - mu) * inv_std;
                acc_b += gr[i];
              }
              if (gamma.requires_grad()) gamma.grad()[ch] += acc_g;
              if (beta.requires_grad()) beta.grad()[ch] += acc_b;
            }
          }
        }
      }
    });
  }
  return out;
}

#define FFINET_INSTANTIATE_CONV(S)                                                            \
  template Tensor<S> conv2d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>*, long,   \
                               long, long, Tape<S>*);                                         \
  template Tensor<S> conv_transpose2d<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>*, \
                                         long, long, long, long, Tape<S>*);                  \
  template Tensor<S> group_norm<S>(const Tensor<S>&, long, const Tensor<S>&, const Tensor<S>&, \
                                   S, Tape<S>*);

FFINET_INSTANTIATE_CONV(float)
FFINET_INSTANTIATE_CONV(double)

}  // namespace ffinet
