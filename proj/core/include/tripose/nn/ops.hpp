#pragma once

#include "tripose/nn/graph.hpp"

#include <vector>

namespace tripose::nn {

// Shapes: "[..., n]" means any leading dimensions, treated as rows.

/// [m, k] x [k, n] -> [m, n]; a may be rank 3, its leading dims act as rows.
Var matmul(Var a, Var b);
/// x W^T + b with x [..., in], W [out, in], b [out]. `bias` may be invalid.
Var linear(Var x, Var weight, Var bias = {});

/// Same shape, or b broadcast as a row over a's rows (b.size() == a.cols()).
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise, identical shapes.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

/// Concatenate along the last axis; all inputs share leading dims.
Var concat(const std::vector<Var>& parts);
/// Columns [begin, end) of the last axis.
Var slice(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);

/// [T, B, D] -> [B, D] at time t.
Var time_step(Var seq, std::size_t t);
/// T tensors of [B, D] -> [T, B, D].
Var stack_time(const std::vector<Var>& steps);
/// [T, B, D] -> [B, D]; gradient goes to the first argmax on ties.
Var max_pool_time(Var seq);
Var mean_pool_time(Var seq);

/// Euclidean norm of every row: [..., n] -> [rows, 1].
Var row_norm(Var a);
/// sqrt(sum a^2) -> scalar. Subgradient 0 at a = 0.
Var frobenius_norm(Var a);
Var sum(Var a);
Var mean(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace tripose::nn
