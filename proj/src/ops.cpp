#include "sgdnet/ops.hpp"

#include <algorithm>
#include <string>

#include "sgdnet/error.hpp"

namespace sgdnet {

namespace kernels {

namespace {

struct Window {
  std::size_t y0, y1, x0, x1;
  std::ptrdiff_t dy, dx;
};

// Output rows/cols whose shifted source (y + dy, x + dx) stays inside the image.
inline Window window(std::size_t h, std::size_t w, std::size_t ky, std::size_t kx, std::size_t kh,
                     std::size_t kw) {
  Window win;
  win.dy = static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(kh / 2);
  win.dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(kw / 2);
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);
  win.y0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -win.dy));
  win.y1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(ih - win.dy, 0, ih));
  win.x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -win.dx));
  win.x1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(iw - win.dx, 0, iw));
  return win;
}

}  // namespace

void conv2d_forward(const double* x, std::size_t cin, std::size_t h, std::size_t w, const double* k,
                    std::size_t cout, std::size_t kh, std::size_t kw, double* out) {
  const std::size_t plane = h * w;
  for (std::size_t co = 0; co < cout; ++co) {
    double* o = out + co * plane;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* src = x + ci * plane;
      const double* kk = k + (co * cin + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const double wgt = kk[ky * kw + kx];
          if (wgt == 0.0) continue;
          const Window win = window(h, w, ky, kx, kh, kw);
          for (std::size_t y = win.y0; y < win.y1; ++y) {
            double* orow = o + y * w;
            const double* srow = src + static_cast<std::ptrdiff_t>(y) * static_cast<std::ptrdiff_t>(w) +
                                 win.dy * static_cast<std::ptrdiff_t>(w) + win.dx;
            for (std::size_t xx = win.x0; xx < win.x1; ++xx) orow[xx] += wgt * srow[xx];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const double* gout, std::size_t cin, std::size_t h, std::size_t w,
                           const double* k, std::size_t cout, std::size_t kh, std::size_t kw, double* gx) {
  const std::size_t plane = h * w;
  for (std::size_t co = 0; co < cout; ++co) {
    const double* g = gout + co * plane;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      double* dst = gx + ci * plane;
      const double* kk = k + (co * cin + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const double wgt = kk[ky * kw + kx];
          if (wgt == 0.0) continue;
          const Window win = window(h, w, ky, kx, kh, kw);
          for (std::size_t y = win.y0; y < win.y1; ++y) {
            const double* grow = g + y * w;
            double* drow = dst + static_cast<std::ptrdiff_t>(y) * static_cast<std::ptrdiff_t>(w) +
                           win.dy * static_cast<std::ptrdiff_t>(w) + win.dx;
            for (std::size_t xx = win.x0; xx < win.x1; ++xx) drow[xx] += wgt * grow[xx];
          }
        }
      }
    }
  }
}

void conv2d_backward_kernels(const double* gout, const double* x, std::size_t cin, std::size_t h,
                             std::size_t w, std::size_t cout, std::size_t kh, std::size_t kw, double* gk) {
  const std::size_t plane = h * w;
  std::vector<double> partial(w);
  for (std::size_t co = 0; co < cout; ++co) {
    const double* g = gout + co * plane;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* src = x + ci * plane;
      double* kk = gk + (co * cin + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const Window win = window(h, w, ky, kx, kh, kw);
          // Column-wise partial sums keep the inner loop vectorisable.
          std::fill(partial.begin(), partial.end(), 0.0);
          for (std::size_t y = win.y0; y < win.y1; ++y) {
            const double* grow = g + y * w;
            const double* srow = src + static_cast<std::ptrdiff_t>(y) * static_cast<std::ptrdiff_t>(w) +
                                 win.dy * static_cast<std::ptrdiff_t>(w) + win.dx;
            for (std::size_t xx = win.x0; xx < win.x1; ++xx) partial[xx] += grow[xx] * srow[xx];
          }
          double acc = 0.0;
          for (std::size_t xx = win.x0; xx < win.x1; ++xx) acc += partial[xx];
          kk[ky * kw + kx] += acc;
        }
      }
    }
  }
}

}  // namespace kernels

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
  return *a.tape;
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value() + b.value();
  return t.record("add", std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad(ia) += g;
    if (tp.requires_grad(ib)) tp.grad(ib) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value() - b.value();
  return t.record("sub", std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad(ia) += g;
    if (tp.requires_grad(ib)) tp.grad(ib) -= g;
  });
}

Var scale(Var a, double factor) {
  Tensor out = factor * a.value();
  return a.tape->record("scale", std::move(out), {a.id}, [ia = a.id, factor](Tape& tp, std::size_t self) {
    axpy(factor, tp.grad(self), tp.grad(ia));
  });
}

Var scalar_mul(Var s, Var a) {
  Tape& t = tape_of(s, a);
  if (s.value().size() != 1) throw ShapeError("scalar_mul: first operand must have one element");
  Tensor out = s.value().item() * a.value();
  return t.record("scalar_mul", std::move(out), {s.id, a.id}, [is = s.id, ia = a.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(is)) tp.grad(is)[0] += dot(g, tp.value(ia));
    if (tp.requires_grad(ia)) axpy(tp.value(is).item(), g, tp.grad(ia));
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape->record("reshape", std::move(out), {a.id}, [ia = a.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& gi = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
  });
}

Var conv2d(Var x, Var kernels, Var bias) {
  Tape& t = tape_of(x, kernels);
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  const Tensor& bv = bias.value();
  if (kv.rank() != 4) throw ShapeError("conv2d: kernels must be Cout x Cin x kh x kw");
  std::size_t cin = 1, h = 0, w = 0;
  if (xv.rank() == 2) {
    h = xv.dim(0);
    w = xv.dim(1);
  } else if (xv.rank() == 3) {
    cin = xv.dim(0);
    h = xv.dim(1);
    w = xv.dim(2);
  } else {
    throw ShapeError("conv2d: input must be H x W or C x H x W, got " + shape_to_string(xv.shape()));
  }
  const std::size_t cout = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
  if (kv.dim(1) != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels but kernels expect " +
                     std::to_string(kv.dim(1)));
  }
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
  if (bv.size() != cout) throw ShapeError("conv2d: bias length must equal output channels");

  Tensor out({cout, h, w});
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill_n(out.raw() + co * h * w, h * w, bv[co]);
  }
  kernels::conv2d_forward(xv.raw(), cin, h, w, kv.raw(), cout, kh, kw, out.raw());

  return t.record("conv2d", std::move(out), {x.id, kernels.id, bias.id},
                  [ix = x.id, ik = kernels.id, ib = bias.id, cin, h, w, cout, kh, kw](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    if (tp.requires_grad(ix)) {
                      kernels::conv2d_backward_input(g.raw(), cin, h, w, tp.value(ik).raw(), cout, kh, kw,
                                                     tp.grad(ix).raw());
                    }
                    if (tp.requires_grad(ik)) {
                      kernels::conv2d_backward_kernels(g.raw(), tp.value(ix).raw(), cin, h, w, cout, kh, kw,
                                                       tp.grad(ik).raw());
                    }
                    if (tp.requires_grad(ib)) {
                      Tensor& gb = tp.grad(ib);
                      const std::size_t plane = h * w;
                      for (std::size_t co = 0; co < cout; ++co) {
                        double s = 0.0;
                        const double* gp = g.raw() + co * plane;
                        for (std::size_t i = 0; i < plane; ++i) s += gp[i];
                        gb[co] += s;
                      }
                    }
                  });
}

Var prelu(Var x, Var slope) {
  Tape& t = tape_of(x, slope);
  if (slope.value().size() != 1) throw ShapeError("prelu: slope must be a single value");
  const double a = slope.value().item();
  Tensor out = x.value();
  for (double& v : out.data()) {
    if (v < 0.0) v *= a;
  }
  return t.record("prelu", std::move(out), {x.id, slope.id}, [ix = x.id, ia = slope.id](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv = tp.value(ix);
    const double av = tp.value(ia).item();
    if (tp.requires_grad(ix)) {
      Tensor& gx = tp.grad(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] < 0.0 ? av * g[i] : g[i];
    }
    if (tp.requires_grad(ia)) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] < 0.0) s += xv[i] * g[i];
      }
      tp.grad(ia)[0] += s;
    }
  });
}

Var sum_squares(Var a) {
  Tensor out = Tensor::scalar(sum_squares(a.value()));
  return a.tape->record("sum_squares", std::move(out), {a.id}, [ia = a.id](Tape& tp, std::size_t self) {
    axpy(2.0 * tp.grad(self).item(), tp.value(ia), tp.grad(ia));
  });
}

Var sum_scalars(const std::vector<Var>& terms, double factor) {
  if (terms.empty()) throw std::invalid_argument("sum_scalars: no terms");
  Tape& t = *terms.front().tape;
  double s = 0.0;
  std::vector<std::size_t> ids;
  ids.reserve(terms.size());
  for (Var v : terms) {
    if (v.tape != &t) throw std::invalid_argument("sum_scalars: terms on different tapes");
    s += v.value().item();
    ids.push_back(v.id);
  }
  auto inputs = ids;
  return t.record("sum_scalars", Tensor::scalar(factor * s), std::move(inputs),
                  [ids = std::move(ids), factor](Tape& tp, std::size_t self) {
                    const double g = factor * tp.grad(self).item();
                    for (std::size_t id : ids) {
                      if (tp.requires_grad(id)) tp.grad(id)[0] += g;
                    }
                  });
}

}  // namespace sgdnet
