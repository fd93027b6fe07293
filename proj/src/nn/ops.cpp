#include "styland/nn/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace styland::nn {

namespace {

template <typename Scalar>
void require_same(Var<Scalar> a, Var<Scalar> b, const char* op) {
  if (a.graph != b.graph) throw std::logic_error(std::string(op) + ": operands from different graphs");
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
}

template <typename Scalar>
Tensor<Scalar> scalar_tensor(Scalar v) {
  return Tensor<Scalar>::scalar(v);
}

// im2col for one sample: rows are (channel, ky, kx), columns are pixels.
template <typename Scalar>
void im2col(const Scalar* src, int channels, int height, int width, int k, RowMatrix<Scalar>& cols) {
  const int pad = k / 2;
  const int plane = height * width;
  cols.resize(static_cast<Eigen::Index>(channels) * k * k, plane);
  for (int c = 0; c < channels; ++c) {
    const Scalar* in = src + static_cast<std::ptrdiff_t>(c) * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* row = cols.data() + ((static_cast<std::ptrdiff_t>(c) * k + ky) * k + kx) * plane;
        const int dy = ky - pad;
        const int dx = kx - pad;
        for (int y = 0; y < height; ++y) {
          const int sy = y + dy;
          Scalar* out = row + static_cast<std::ptrdiff_t>(y) * width;
          if (sy < 0 || sy >= height) {
            std::fill(out, out + width, Scalar(0));
            continue;
          }
          const Scalar* line = in + static_cast<std::ptrdiff_t>(sy) * width;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(width, width - dx);
          for (int x = 0; x < x0; ++x) out[x] = Scalar(0);
          for (int x = x0; x < x1; ++x) out[x] = line[x + dx];
          for (int x = x1; x < width; ++x) out[x] = Scalar(0);
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, int channels, int height, int width, int k, Scalar* dst) {
  const int pad = k / 2;
  const int plane = height * width;
  for (int c = 0; c < channels; ++c) {
    Scalar* out = dst + static_cast<std::ptrdiff_t>(c) * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* row = cols.data() + ((static_cast<std::ptrdiff_t>(c) * k + ky) * k + kx) * plane;
        const int dy = ky - pad;
        const int dx = kx - pad;
        for (int y = 0; y < height; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= height) continue;
          const Scalar* in = row + static_cast<std::ptrdiff_t>(y) * width;
          Scalar* line = out + static_cast<std::ptrdiff_t>(sy) * width;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(width, width - dx);
          for (int x = x0; x < x1; ++x) line[x + dx] += in[x];
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  require_same(a, b, "add");
  Tensor<Scalar> out(a.shape());
  out.data() = a.value().data() + b.value().data();
  const int ia = a.id;
  const int ib = b.id;
  return a.graph->record(std::move(out), {a, b}, [ia, ib](Graph<Scalar>& g, int self) {
    const auto& go = g.node_grad(self).data();
    if (g.requires_grad(ia)) g.grad_buffer(ia).data() += go;
    if (g.requires_grad(ib)) g.grad_buffer(ib).data() += go;
  });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  require_same(a, b, "sub");
  Tensor<Scalar> out(a.shape());
  out.data() = a.value().data() - b.value().data();
  const int ia = a.id;
  const int ib = b.id;
  return a.graph->record(std::move(out), {a, b}, [ia, ib](Graph<Scalar>& g, int self) {
    const auto& go = g.node_grad(self).data();
    if (g.requires_grad(ia)) g.grad_buffer(ia).data() += go;
    if (g.requires_grad(ib)) g.grad_buffer(ib).data() -= go;
  });
}

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  require_same(a, b, "mul");
  Tensor<Scalar> out(a.shape());
  out.data() = a.value().data() * b.value().data();
  const int ia = a.id;
  const int ib = b.id;
  return a.graph->record(std::move(out), {a, b}, [ia, ib](Graph<Scalar>& g, int self) {
    const auto& go = g.node_grad(self).data();
    if (g.requires_grad(ia)) g.grad_buffer(ia).data() += go * g.node_value(ib).data();
    if (g.requires_grad(ib)) g.grad_buffer(ib).data() += go * g.node_value(ia).data();
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  Tensor<Scalar> out(a.shape());
  out.data() = a.value().data() * s;
  const int ia = a.id;
  return a.graph->record(std::move(out), {a}, [ia, s](Graph<Scalar>& g, int self) {
    g.grad_buffer(ia).data() += g.node_grad(self).data() * s;
  });
}

template <typename Scalar>
Var<Scalar> add_scalar(Var<Scalar> a, Scalar s) {
  Tensor<Scalar> out(a.shape());
  out.data() = a.value().data() + s;
  const int ia = a.id;
  return a.graph->record(std::move(out), {a}, [ia](Graph<Scalar>& g, int self) {
    g.grad_buffer(ia).data() += g.node_grad(self).data();
  });
}

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> a, Scalar slope) {
  Tensor<Scalar> out(a.shape());
  const auto& x = a.value().data();
  out.data() = (x > Scalar(0)).select(x, x * slope);
  const int ia = a.id;
  return a.graph->record(std::move(out), {a}, [ia, slope](Graph<Scalar>& g, int self) {
    const auto& xin = g.node_value(ia).data();
    const auto& go = g.node_grad(self).data();
    g.grad_buffer(ia).data() += (xin > Scalar(0)).select(go, go * slope);
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Tensor<Scalar> out(a.shape());
  out.data() = a.value().data().tanh();
  const int ia = a.id;
  return a.graph->record(std::move(out), {a}, [ia](Graph<Scalar>& g, int self) {
    const auto& y = g.node_value(self).data();
    g.grad_buffer(ia).data() += g.node_grad(self).data() * (Scalar(1) - y.square());
  });
}

template <typename Scalar>
Var<Scalar> softplus(Var<Scalar> a) {
  Tensor<Scalar> out(a.shape());
  const auto& x = a.value().data();
  // max(x,0) + log1p(exp(-|x|))
  out.data() = x.max(Scalar(0)) + (-x.abs()).exp().log1p();
  const int ia = a.id;
  return a.graph->record(std::move(out), {a}, [ia](Graph<Scalar>& g, int self) {
    const auto& xin = g.node_value(ia).data();
    const auto sigmoid = Scalar(1) / (Scalar(1) + (-xin).exp());
    g.grad_buffer(ia).data() += g.node_grad(self).data() * sigmoid;
  });
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> a) {
  Tensor<Scalar> out(a.shape());
  out.data() = a.value().data().square();
  const int ia = a.id;
  return a.graph->record(std::move(out), {a}, [ia](Graph<Scalar>& g, int self) {
    g.grad_buffer(ia).data() += Scalar(2) * g.node_grad(self).data() * g.node_value(ia).data();
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  const int ia = a.id;
  return a.graph->record(scalar_tensor(a.value().data().sum()), {a}, [ia](Graph<Scalar>& g, int self) {
    g.grad_buffer(ia).data() += g.node_grad(self).item();
  });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  const int ia = a.id;
  const auto count = static_cast<Scalar>(a.value().size());
  return a.graph->record(scalar_tensor(a.value().data().mean()), {a}, [ia, count](Graph<Scalar>& g, int self) {
    g.grad_buffer(ia).data() += g.node_grad(self).item() / count;
  });
}

template <typename Scalar>
Var<Scalar> mean_abs_diff(Var<Scalar> a, Var<Scalar> b) {
  require_same(a, b, "mean_abs_diff");
  const auto count = static_cast<Scalar>(a.value().size());
  const Scalar v = (a.value().data() - b.value().data()).abs().sum() / count;
  const int ia = a.id;
  const int ib = b.id;
  return a.graph->record(scalar_tensor(v), {a, b}, [ia, ib, count](Graph<Scalar>& g, int self) {
    const Scalar go = g.node_grad(self).item() / count;
    const auto sign = (g.node_value(ia).data() - g.node_value(ib).data()).sign();
    if (g.requires_grad(ia)) g.grad_buffer(ia).data() += go * sign;
    if (g.requires_grad(ib)) g.grad_buffer(ib).data() -= go * sign;
  });
}

template <typename Scalar>
Var<Scalar> sample_mean(Var<Scalar> a) {
  const Shape s = a.shape();
  Tensor<Scalar> out(Shape{s.n, 1, 1, 1});
  const auto per = s.sample();
  for (int i = 0; i < s.n; ++i) out.data()[i] = a.value().data().segment(i * per, per).mean();
  const int ia = a.id;
  return a.graph->record(std::move(out), {a}, [ia, s](Graph<Scalar>& g, int self) {
    const auto per_sample = s.sample();
    auto& gi = g.grad_buffer(ia).data();
    for (int i = 0; i < s.n; ++i) {
      gi.segment(i * per_sample, per_sample) += g.node_grad(self).data()[i] / static_cast<Scalar>(per_sample);
    }
  });
}

template <typename Scalar>
Var<Scalar> linear(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const auto features = xs.sample();
  if (ws.sample() != features) {
    throw std::invalid_argument("linear: input features " + std::to_string(features) + " vs weight " + to_string(ws));
  }
  if (bias.shape().numel() != ws.n) throw std::invalid_argument("linear: bias size mismatch");
  using Map = Eigen::Map<const RowMatrix<Scalar>>;
  const Map X(x.value().ptr(), xs.n, features);
  const Map W(weight.value().ptr(), ws.n, features);
  Tensor<Scalar> out(Shape{xs.n, ws.n, 1, 1});
  Eigen::Map<RowMatrix<Scalar>> Y(out.ptr(), xs.n, ws.n);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(bias.value().ptr(), ws.n);
  const int ix = x.id;
  const int iw = weight.id;
  const int ib = bias.id;
  return x.graph->record(std::move(out), {x, weight, bias}, [ix, iw, ib, xs, ws, features](Graph<Scalar>& g, int self) {
    const Map GY(g.node_grad(self).ptr(), xs.n, ws.n);
    if (g.requires_grad(ix)) {
      const Map Wv(g.node_value(iw).ptr(), ws.n, features);
      Eigen::Map<RowMatrix<Scalar>>(g.grad_buffer(ix).ptr(), xs.n, features).noalias() += GY * Wv;
    }
    if (g.requires_grad(iw)) {
      const Map Xv(g.node_value(ix).ptr(), xs.n, features);
      Eigen::Map<RowMatrix<Scalar>>(g.grad_buffer(iw).ptr(), ws.n, features).noalias() += GY.transpose() * Xv;
    }
    if (g.requires_grad(ib)) {
      Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(g.grad_buffer(ib).ptr(), ws.n) += GY.colwise().sum();
    }
  });
}

template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const int k = ws.h;
  if (ws.w != k || k % 2 == 0) throw std::invalid_argument("conv2d: kernel must be square and odd");
  if (ws.c != xs.c) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(xs.c) + " vs weight " + to_string(ws));
  }
  if (bias.shape().numel() != ws.n) throw std::invalid_argument("conv2d: bias size mismatch");
  const auto taps = static_cast<Eigen::Index>(ws.c) * k * k;
  using CMap = Eigen::Map<const RowMatrix<Scalar>>;
  const CMap W(weight.value().ptr(), ws.n, taps);
  const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> B(bias.value().ptr(), ws.n);
  const Shape os{xs.n, ws.n, xs.h, xs.w};
  Tensor<Scalar> out(os);
  RowMatrix<Scalar> cols;
  for (int i = 0; i < xs.n; ++i) {
    auto Y = out.sample(i);
    if (k == 1) {
      Y.noalias() = W * x.value().sample(i);
    } else {
      im2col(x.value().ptr() + i * xs.sample(), xs.c, xs.h, xs.w, k, cols);
      Y.noalias() = W * cols;
    }
    Y.colwise() += B;
  }
  const int ix = x.id;
  const int iw = weight.id;
  const int ib = bias.id;
  return x.graph->record(std::move(out), {x, weight, bias}, [ix, iw, ib, xs, ws, k, taps](Graph<Scalar>& g, int self) {
    const auto& gout = g.node_grad(self);
    const bool need_x = g.requires_grad(ix);
    const bool need_w = g.requires_grad(iw);
    const bool need_b = g.requires_grad(ib);
    const CMap Wv(g.node_value(iw).ptr(), ws.n, taps);
    RowMatrix<Scalar> buffer;
    for (int i = 0; i < xs.n; ++i) {
      const auto GY = gout.sample(i);
      if (need_b) {
        Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(g.grad_buffer(ib).ptr(), ws.n) += GY.rowwise().sum();
      }
      if (k == 1) {
        if (need_w) {
          Eigen::Map<RowMatrix<Scalar>>(g.grad_buffer(iw).ptr(), ws.n, taps).noalias() +=
              GY * g.node_value(ix).sample(i).transpose();
        }
        if (need_x) g.grad_buffer(ix).sample(i).noalias() += Wv.transpose() * GY;
        continue;
      }
      if (need_w) {
        im2col(g.node_value(ix).ptr() + i * xs.sample(), xs.c, xs.h, xs.w, k, buffer);
        Eigen::Map<RowMatrix<Scalar>>(g.grad_buffer(iw).ptr(), ws.n, taps).noalias() += GY * buffer.transpose();
      }
      if (need_x) {
        buffer.noalias() = Wv.transpose() * GY;
        col2im_add(buffer, xs.c, xs.h, xs.w, k, g.grad_buffer(ix).ptr() + i * xs.sample());
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> upsample2x(Var<Scalar> x) {
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h * 2, s.w * 2};
  Tensor<Scalar> out(os);
  const Scalar* src = x.value().ptr();
  Scalar* dst = out.ptr();
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(s.n) * s.c; ++p) {
    const Scalar* in = src + p * s.plane();
    Scalar* o = dst + p * os.plane();
    for (int y = 0; y < os.h; ++y) {
      const Scalar* line = in + static_cast<std::ptrdiff_t>(y / 2) * s.w;
      Scalar* row = o + static_cast<std::ptrdiff_t>(y) * os.w;
      for (int xx = 0; xx < os.w; ++xx) row[xx] = line[xx / 2];
    }
  }
  const int ix = x.id;
  return x.graph->record(std::move(out), {x}, [ix, s, os](Graph<Scalar>& g, int self) {
    const Scalar* go = g.node_grad(self).ptr();
    Scalar* gi = g.grad_buffer(ix).ptr();
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(s.n) * s.c; ++p) {
      const Scalar* o = go + p * os.plane();
      Scalar* in = gi + p * s.plane();
      for (int y = 0; y < os.h; ++y) {
        Scalar* line = in + static_cast<std::ptrdiff_t>(y / 2) * s.w;
        const Scalar* row = o + static_cast<std::ptrdiff_t>(y) * os.w;
        for (int xx = 0; xx < os.w; ++xx) line[xx / 2] += row[xx];
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> avg_pool(Var<Scalar> x, int factor) {
  const Shape s = x.shape();
  if (factor < 1 || s.h % factor != 0 || s.w % factor != 0) {
    throw std::invalid_argument("avg_pool: factor " + std::to_string(factor) + " does not divide " + to_string(s));
  }
  if (factor == 1) return x;
  const Shape os{s.n, s.c, s.h / factor, s.w / factor};
  const Scalar inv = Scalar(1) / static_cast<Scalar>(factor * factor);
  Tensor<Scalar> out(os);
  const Scalar* src = x.value().ptr();
  Scalar* dst = out.ptr();
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(s.n) * s.c; ++p) {
    const Scalar* in = src + p * s.plane();
    Scalar* o = dst + p * os.plane();
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        o[(y / factor) * os.w + xx / factor] += in[static_cast<std::ptrdiff_t>(y) * s.w + xx];
      }
    }
    for (std::ptrdiff_t q = 0; q < os.plane(); ++q) o[q] *= inv;
  }
  const int ix = x.id;
  return x.graph->record(std::move(out), {x}, [ix, s, os, factor, inv](Graph<Scalar>& g, int self) {
    const Scalar* go = g.node_grad(self).ptr();
    Scalar* gi = g.grad_buffer(ix).ptr();
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(s.n) * s.c; ++p) {
      const Scalar* o = go + p * os.plane();
      Scalar* in = gi + p * s.plane();
      for (int y = 0; y < s.h; ++y) {
        for (int xx = 0; xx < s.w; ++xx) {
          in[static_cast<std::ptrdiff_t>(y) * s.w + xx] += o[(y / factor) * os.w + xx / factor] * inv;
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> nearest_downsample(Var<Scalar> x, int factor) {
  const Shape s = x.shape();
  if (factor < 1 || s.h % factor != 0 || s.w % factor != 0) {
    throw std::invalid_argument("nearest_downsample: factor " + std::to_string(factor) + " does not divide " +
                                to_string(s));
  }
  if (factor == 1) return x;
  const Shape os{s.n, s.c, s.h / factor, s.w / factor};
  Tensor<Scalar> out(os);
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(s.n) * s.c; ++p) {
    const Scalar* in = x.value().ptr() + p * s.plane();
    Scalar* o = out.ptr() + p * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) o[y * os.w + xx] = in[static_cast<std::ptrdiff_t>(y) * factor * s.w + xx * factor];
    }
  }
  const int ix = x.id;
  return x.graph->record(std::move(out), {x}, [ix, s, os, factor](Graph<Scalar>& g, int self) {
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(s.n) * s.c; ++p) {
      const Scalar* o = g.node_grad(self).ptr() + p * os.plane();
      Scalar* in = g.grad_buffer(ix).ptr() + p * s.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) in[static_cast<std::ptrdiff_t>(y) * factor * s.w + xx * factor] += o[y * os.w + xx];
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const Shape first = parts.front().shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw std::invalid_argument("concat_channels: shape mismatch " + to_string(first) + " vs " + to_string(s));
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  Tensor<Scalar> out(os);
  std::vector<int> ids;
  std::vector<int> widths;
  int offset = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    for (int i = 0; i < s.n; ++i) {
      out.data().segment(i * os.sample() + static_cast<std::ptrdiff_t>(offset) * os.plane(), s.sample()) =
          p.value().data().segment(i * s.sample(), s.sample());
    }
    offset += s.c;
    ids.push_back(p.id);
    widths.push_back(s.c);
  }
  return parts.front().graph->record(std::move(out), parts, [ids, widths, os](Graph<Scalar>& g, int self) {
    int off = 0;
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const auto per = static_cast<std::ptrdiff_t>(widths[j]) * os.plane();
      if (g.requires_grad(ids[j])) {
        auto& gi = g.grad_buffer(ids[j]).data();
        for (int i = 0; i < os.n; ++i) {
          gi.segment(i * per, per) +=
              g.node_grad(self).data().segment(i * os.sample() + static_cast<std::ptrdiff_t>(off) * os.plane(), per);
        }
      }
      off += widths[j];
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_channels(Var<Scalar> x, int start, int count) {
  const Shape s = x.shape();
  if (start < 0 || count < 1 || start + count > s.c) throw std::invalid_argument("slice_channels: out of range");
  const Shape os{s.n, count, s.h, s.w};
  Tensor<Scalar> out(os);
  for (int i = 0; i < s.n; ++i) {
    out.data().segment(i * os.sample(), os.sample()) =
        x.value().data().segment(i * s.sample() + static_cast<std::ptrdiff_t>(start) * s.plane(), os.sample());
  }
  const int ix = x.id;
  return x.graph->record(std::move(out), {x}, [ix, s, os, start](Graph<Scalar>& g, int self) {
    auto& gi = g.grad_buffer(ix).data();
    for (int i = 0; i < s.n; ++i) {
      gi.segment(i * s.sample() + static_cast<std::ptrdiff_t>(start) * s.plane(), os.sample()) +=
          g.node_grad(self).data().segment(i * os.sample(), os.sample());
    }
  });
}

template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> x, Shape shape) {
  const int ix = x.id;
  return x.graph->record(x.value().reshaped(shape), {x}, [ix](Graph<Scalar>& g, int self) {
    g.grad_buffer(ix).data() += g.node_grad(self).data();
  });
}

template <typename Scalar>
Var<Scalar> repeat_batch(Var<Scalar> x, int count) {
  const Shape s = x.shape();
  if (s.n != 1 || count < 1) throw std::invalid_argument("repeat_batch: expects a batch-1 input and count >= 1");
  if (count == 1) return x;
  Tensor<Scalar> out(Shape{count, s.c, s.h, s.w});
  for (int i = 0; i < count; ++i) out.data().segment(i * s.sample(), s.sample()) = x.value().data();
  const int ix = x.id;
  return x.graph->record(std::move(out), {x}, [ix, s, count](Graph<Scalar>& g, int self) {
    auto& gi = g.grad_buffer(ix).data();
    for (int i = 0; i < count; ++i) gi += g.node_grad(self).data().segment(i * s.sample(), s.sample());
  });
}

template <typename Scalar>
Var<Scalar> instance_norm(Var<Scalar> x, Scalar eps) {
  const Shape s = x.shape();
  const auto planes = static_cast<std::ptrdiff_t>(s.n) * s.c;
  const auto hw = s.plane();
  Tensor<Scalar> out(s);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_std(planes);
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const auto in = x.value().data().segment(p * hw, hw);
    const Scalar mu = in.mean();
    const Scalar var = (in - mu).square().mean();
    inv_std[p] = Scalar(1) / std::sqrt(var + eps);
    out.data().segment(p * hw, hw) = (in - mu) * inv_std[p];
  }
  const int ix = x.id;
  return x.graph->record(std::move(out), {x}, [ix, planes, hw, inv_std](Graph<Scalar>& g, int self) {
    const auto& y = g.node_value(self).data();
    const auto& go = g.node_grad(self).data();
    auto& gi = g.grad_buffer(ix).data();
    for (std::ptrdiff_t p = 0; p < planes; ++p) {
      const auto yp = y.segment(p * hw, hw);
      const auto gp = go.segment(p * hw, hw);
      const Scalar mean_g = gp.mean();
      const Scalar mean_gy = (gp * yp).mean();
      gi.segment(p * hw, hw) += inv_std[p] * (gp - mean_g - yp * mean_gy);
    }
  });
}

namespace {

// Shared body of the per-pixel channel normalizations: y = x * r with
// r = 1/sqrt(alpha * sum_c x^2 + eps).
template <typename Scalar>
Var<Scalar> channel_norm(Var<Scalar> x, Scalar alpha, Scalar eps) {
  const Shape s = x.shape();
  const auto hw = s.plane();
  Tensor<Scalar> out(s);
  Tensor<Scalar> r(Shape{s.n, 1, s.h, s.w});
  for (int i = 0; i < s.n; ++i) {
    const auto X = x.value().sample(i);
    auto R = r.sample(i);
    R = ((X.array().square().colwise().sum() * alpha) + eps).rsqrt().matrix();
    out.sample(i) = (X.array().rowwise() * R.array().row(0)).matrix();
  }
  const int ix = x.id;
  return x.graph->record(std::move(out), {x}, [ix, s, hw, alpha, r](Graph<Scalar>& g, int self) {
    (void)hw;
    for (int i = 0; i < s.n; ++i) {
      const auto X = g.node_value(ix).sample(i).array();
      const auto G = g.node_grad(self).sample(i).array();
      const auto R = r.sample(i).array().row(0);
      // dy/dx = r*I - alpha * r^3 * x x^T
      const auto dot = (G * X).colwise().sum();
      g.grad_buffer(ix).sample(i).array() +=
          (G.rowwise() * R) - (X.rowwise() * (alpha * R.cube() * dot));
    }
  });
}

}  // namespace

template <typename Scalar>
Var<Scalar> pixel_norm(Var<Scalar> x, Scalar eps) {
  return channel_norm(x, Scalar(1) / static_cast<Scalar>(x.shape().c), eps);
}

template <typename Scalar>
Var<Scalar> channel_unit_norm(Var<Scalar> x, Scalar eps) {
  return channel_norm(x, Scalar(1), eps);
}

template <typename Scalar>
Var<Scalar> add_noise(Var<Scalar> x, const Tensor<Scalar>& noise, Var<Scalar> strength) {
  const Shape s = x.shape();
  if (noise.shape() != Shape{s.n, 1, s.h, s.w}) {
    throw std::invalid_argument("add_noise: noise " + to_string(noise.shape()) + " for input " + to_string(s));
  }
  const Scalar k = strength.value().item();
  Tensor<Scalar> out = x.value();
  for (int i = 0; i < s.n; ++i) {
    out.sample(i).rowwise() += k * noise.sample(i).row(0);
  }
  const int ix = x.id;
  const int is = strength.id;
  return x.graph->record(std::move(out), {x, strength}, [ix, is, s, noise](Graph<Scalar>& g, int self) {
    if (g.requires_grad(ix)) g.grad_buffer(ix).data() += g.node_grad(self).data();
    if (g.requires_grad(is)) {
      Scalar acc = 0;
      for (int i = 0; i < s.n; ++i) {
        acc += (g.node_grad(self).sample(i).colwise().sum().array() * noise.sample(i).row(0).array()).sum();
      }
      g.grad_buffer(is).data()[0] += acc;
    }
  });
}

#define STYLAND_INSTANTIATE_OPS(S)                                                   \
  template Var<S> add(Var<S>, Var<S>);                                               \
  template Var<S> sub(Var<S>, Var<S>);                                               \
  template Var<S> mul(Var<S>, Var<S>);                                               \
  template Var<S> scale(Var<S>, S);                                                  \
  template Var<S> add_scalar(Var<S>, S);                                             \
  template Var<S> leaky_relu(Var<S>, S);                                             \
  template Var<S> tanh(Var<S>);                                                      \
  template Var<S> softplus(Var<S>);                                                  \
  template Var<S> square(Var<S>);                                                    \
  template Var<S> sum(Var<S>);                                                       \
  template Var<S> mean(Var<S>);                                                      \
  template Var<S> mean_abs_diff(Var<S>, Var<S>);                                     \
  template Var<S> sample_mean(Var<S>);                                               \
  template Var<S> linear(Var<S>, Var<S>, Var<S>);                                    \
  template Var<S> conv2d(Var<S>, Var<S>, Var<S>);                                    \
  template Var<S> upsample2x(Var<S>);                                                \
  template Var<S> avg_pool(Var<S>, int);                                             \
  template Var<S> nearest_downsample(Var<S>, int);                                   \
  template Var<S> concat_channels(const std::vector<Var<S>>&);                       \
  template Var<S> slice_channels(Var<S>, int, int);                                  \
  template Var<S> reshape(Var<S>, Shape);                                            \
  template Var<S> repeat_batch(Var<S>, int);                                         \
  template Var<S> instance_norm(Var<S>, S);                                          \
  template Var<S> pixel_norm(Var<S>, S);                                             \
  template Var<S> channel_unit_norm(Var<S>, S);                                      \
  template Var<S> add_noise(Var<S>, const Tensor<S>&, Var<S>);

STYLAND_INSTANTIATE_OPS(float)
STYLAND_INSTANTIATE_OPS(double)

}  // namespace styland::nn
