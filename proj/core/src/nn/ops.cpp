#include "tripose/nn/ops.hpp"

#include "tripose/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tripose::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ShapeMismatch, what);
}

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Leading dims of `like` with a new trailing dim.
Shape with_cols(const Shape& like, std::size_t cols) {
  Shape s = like;
  if (s.empty()) s = {1};
  s.back() = cols;
  return s;
}

template <typename F, typename D>
Var unary(Var a, F forward, D derivative) {
  Tensor out(a.shape());
  const auto in = a.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, derivative](Graph& g, std::size_t self) {
    if (!g.requires_grad(ia)) return;
    const Tensor& y = g.value(self);
    const Tensor& x = g.value(ia);
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.accumulate_grad(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(bv.rank() == 2 && av.rank() >= 2 && av.cols() == bv.dim(0),
          "matmul " + to_string(av.shape()) + " x " + to_string(bv.shape()));
  Tensor out(with_cols(av.shape(), bv.cols()));
  out.matrix().noalias() = av.matrix() * bv.matrix();
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const auto gy = g.grad(self).matrix();
    if (g.requires_grad(ia)) g.accumulate_grad(ia).matrix().noalias() += gy * g.value(ib).matrix().transpose();
    if (g.requires_grad(ib)) g.accumulate_grad(ib).matrix().noalias() += g.value(ia).matrix().transpose() * gy;
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require(wv.rank() == 2 && xv.rank() >= 1 && xv.cols() == wv.dim(1),
          "linear " + to_string(xv.shape()) + " with weight " + to_string(wv.shape()));
  Tensor out(with_cols(xv.shape(), wv.dim(0)));
  out.matrix().noalias() = xv.matrix() * wv.matrix().transpose();
  const bool has_bias = bias.valid();
  if (has_bias) {
    require(bias.value().size() == wv.dim(0), "linear bias size");
    out.matrix().rowwise() += bias.value().matrix().row(0);
  }
  const std::size_t ixx = x.id(), iw = weight.id(), ibias = has_bias ? bias.id() : 0;
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return x.graph().record(std::move(out), inputs, [ixx, iw, ibias, has_bias](Graph& g, std::size_t self) {
    const auto gy = g.grad(self).matrix();
    if (g.requires_grad(ixx)) g.accumulate_grad(ixx).matrix().noalias() += gy * g.value(iw).matrix();
    if (g.requires_grad(iw)) g.accumulate_grad(iw).matrix().noalias() += gy.transpose() * g.value(ixx).matrix();
    if (has_bias && g.requires_grad(ibias)) {
      g.accumulate_grad(ibias).matrix().row(0) += gy.colwise().sum();
    }
  });
}

namespace {

enum class Broadcast { None, Row };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::None;
  require(b.size() == a.cols() && b.rows() == 1 && a.rank() >= 1,
          std::string(op) + " " + to_string(a.shape()) + " and " + to_string(b.shape()));
  return Broadcast::Row;
}

Var add_like(Var a, Var b, double sign, const char* op) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), op);
  Tensor out = a.value();
  if (kind == Broadcast::None) {
    out.matrix() += sign * b.value().matrix();
  } else {
    out.matrix().rowwise() += sign * b.value().matrix().row(0);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib, sign, kind](Graph& g, std::size_t self) {
    const auto gy = g.grad(self).matrix();
    if (g.requires_grad(ia)) g.accumulate_grad(ia).matrix() += gy;
    if (g.requires_grad(ib)) {
      auto gb = g.accumulate_grad(ib).matrix();
      if (kind == Broadcast::None) {
        gb += sign * gy;
      } else {
        gb.row(0) += sign * gy.colwise().sum();
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_like(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_like(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  require(a.shape() == b.shape(), "mul " + to_string(a.shape()) + " and " + to_string(b.shape()));
  Tensor out = a.value();
  out.matrix().array() *= b.value().matrix().array();
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const auto gy = g.grad(self).matrix().array();
    if (g.requires_grad(ia)) g.accumulate_grad(ia).matrix().array() += gy * g.value(ib).matrix().array();
    if (g.requires_grad(ib)) g.accumulate_grad(ib).matrix().array() += gy * g.value(ia).matrix().array();
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  out.matrix() *= s;
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, s](Graph& g, std::size_t self) {
    if (g.requires_grad(ia)) g.accumulate_grad(ia).matrix() += s * g.grad(self).matrix();
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  out.matrix().array() += s;
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia](Graph& g, std::size_t self) {
    if (g.requires_grad(ia)) g.accumulate_grad(ia).matrix() += g.grad(self).matrix();
  });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of nothing");
  const Tensor& first = parts.front().value();
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    require(p.value().rows() == first.rows() && p.value().rank() == first.rank(), "concat leading dims differ");
    offsets.push_back(cols);
    cols += p.value().cols();
  }
  Tensor out(with_cols(first.shape(), cols));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    out.matrix().middleCols(ix(offsets[k]), ix(pv.cols())) = pv.matrix();
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts.front().graph().record(std::move(out), parts, [ids, offsets](Graph& g, std::size_t self) {
    const auto gy = g.grad(self).matrix();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) continue;
      auto gx = g.accumulate_grad(ids[k]).matrix();
      gx += gy.middleCols(ix(offsets[k]), gx.cols());
    }
  });
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require(begin < end && end <= av.cols(), "slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                                               to_string(av.shape()));
  Tensor out(with_cols(av.shape(), end - begin));
  out.matrix() = av.matrix().middleCols(ix(begin), ix(end - begin));
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, begin](Graph& g, std::size_t self) {
    if (!g.requires_grad(ia)) return;
    const auto gy = g.grad(self).matrix();
    g.accumulate_grad(ia).matrix().middleCols(ix(begin), gy.cols()) += gy;
  });
}

Var reshape(Var a, Shape shape) {
  require(element_count(shape) == a.value().size(), "reshape " + to_string(a.shape()) + " to " + to_string(shape));
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia](Graph& g, std::size_t self) {
    if (!g.requires_grad(ia)) return;
    Tensor& gx = g.accumulate_grad(ia);
    const Tensor& gy = g.grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
}

Var time_step(Var seq, std::size_t t) {
  const Tensor& sv = seq.value();
  require(sv.rank() == 3 && t < sv.dim(0), "time_step " + std::to_string(t) + " of " + to_string(sv.shape()));
  const std::size_t block = sv.dim(1) * sv.dim(2);
  Tensor out(Shape{sv.dim(1), sv.dim(2)});
  std::copy_n(sv.data() + t * block, block, out.data());
  const std::size_t is = seq.id();
  return seq.graph().record(std::move(out), {seq}, [is, t, block](Graph& g, std::size_t self) {
    if (!g.requires_grad(is)) return;
    const Tensor& gy = g.grad(self);
    double* gx = g.accumulate_grad(is).data() + t * block;
    for (std::size_t i = 0; i < block; ++i) gx[i] += gy[i];
  });
}

Var stack_time(const std::vector<Var>& steps) {
  require(!steps.empty(), "stack_time of nothing");
  const Shape s0 = steps.front().shape();
  require(s0.size() == 2, "stack_time expects [B, D] steps");
  const std::size_t block = s0[0] * s0[1];
  Tensor out(Shape{steps.size(), s0[0], s0[1]});
  for (std::size_t t = 0; t < steps.size(); ++t) {
    require(steps[t].shape() == s0, "stack_time steps differ in shape");
    std::copy_n(steps[t].value().data(), block, out.data() + t * block);
  }
  std::vector<std::size_t> ids;
  for (const Var& v : steps) ids.push_back(v.id());
  return steps.front().graph().record(std::move(out), steps, [ids, block](Graph& g, std::size_t self) {
    const double* gy = g.grad(self).data();
    for (std::size_t t = 0; t < ids.size(); ++t) {
      if (!g.requires_grad(ids[t])) continue;
      double* gx = g.accumulate_grad(ids[t]).data();
      for (std::size_t i = 0; i < block; ++i) gx[i] += gy[t * block + i];
    }
  });
}

Var max_pool_time(Var seq) {
  const Tensor& sv = seq.value();
  require(sv.rank() == 3 && sv.dim(0) >= 1, "max_pool_time expects [T, B, D], got " + to_string(sv.shape()));
  const std::size_t steps = sv.dim(0), block = sv.dim(1) * sv.dim(2);
  Tensor out(Shape{sv.dim(1), sv.dim(2)});
  std::vector<std::size_t> argmax(block, 0);
  for (std::size_t i = 0; i < block; ++i) {
    double best = sv[i];
    for (std::size_t t = 1; t < steps; ++t) {
      if (sv[t * block + i] > best) {
        best = sv[t * block + i];
        argmax[i] = t;
      }
    }
    out[i] = best;
  }
  const std::size_t is = seq.id();
  return seq.graph().record(std::move(out), {seq}, [is, block, argmax = std::move(argmax)](Graph& g, std::size_t self) {
    if (!g.requires_grad(is)) return;
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.accumulate_grad(is);
    for (std::size_t i = 0; i < block; ++i) gx[argmax[i] * block + i] += gy[i];
  });
}

Var mean_pool_time(Var seq) {
  const Tensor& sv = seq.value();
  require(sv.rank() == 3 && sv.dim(0) >= 1, "mean_pool_time expects [T, B, D], got " + to_string(sv.shape()));
  const std::size_t steps = sv.dim(0), block = sv.dim(1) * sv.dim(2);
  Tensor out(Shape{sv.dim(1), sv.dim(2)});
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < block; ++i) out[i] += sv[t * block + i];
  const double inv = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < block; ++i) out[i] *= inv;
  const std::size_t is = seq.id();
  return seq.graph().record(std::move(out), {seq}, [is, steps, block, inv](Graph& g, std::size_t self) {
    if (!g.requires_grad(is)) return;
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.accumulate_grad(is);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < block; ++i) gx[t * block + i] += inv * gy[i];
  });
}

Var row_norm(Var a) {
  const Tensor& av = a.value();
  Tensor out(Shape{av.rows(), 1});
  out.matrix() = av.matrix().rowwise().norm();
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia](Graph& g, std::size_t self) {
    if (!g.requires_grad(ia)) return;
    const auto x = g.value(ia).matrix();
    const auto y = g.value(self).matrix();
    const auto gy = g.grad(self).matrix();
    auto gx = g.accumulate_grad(ia).matrix();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (y(r, 0) > 0.0) gx.row(r) += (gy(r, 0) / y(r, 0)) * x.row(r);
    }
  });
}

Var frobenius_norm(Var a) {
  Tensor out = Tensor::scalar(a.value().matrix().norm());
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia](Graph& g, std::size_t self) {
    if (!g.requires_grad(ia)) return;
    const double y = g.value(self)[0];
    if (y > 0.0) g.accumulate_grad(ia).matrix() += (g.grad(self)[0] / y) * g.value(ia).matrix();
  });
}

Var sum(Var a) {
  Tensor out = Tensor::scalar(a.value().matrix().sum());
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia](Graph& g, std::size_t self) {
    if (g.requires_grad(ia)) g.accumulate_grad(ia).matrix().array() += g.grad(self)[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  require(n > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

}  // namespace tripose::nn
