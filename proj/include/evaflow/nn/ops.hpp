#pragma once

#include <cstdint>
#include <vector>

#include "evaflow/nn/graph.hpp"

namespace evaflow::nn {

/// Cross-correlation of x (N,Cin,H,W) with w (Cout,Cin,K,K); `bias` may be undefined.
template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var bias, int stride, int pad);

template <typename T> Var add(Graph<T>& g, Var a, Var b);
template <typename T> Var sub(Graph<T>& g, Var a, Var b);
template <typename T> Var mul(Graph<T>& g, Var a, Var b);
template <typename T> Var scale(Graph<T>& g, Var a, T factor);
template <typename T> Var one_minus(Graph<T>& g, Var a);

template <typename T> Var sigmoid(Graph<T>& g, Var a);
template <typename T> Var tanh(Graph<T>& g, Var a);
template <typename T> Var relu(Graph<T>& g, Var a);
template <typename T> Var leaky_relu(Graph<T>& g, Var a, T slope);

/// Concatenates rank-4 tensors with equal N, H, W along channels.
template <typename T> Var concat_channels(Graph<T>& g, const std::vector<Var>& parts);
/// Batch element n of x as a (1, C, H, W) tensor.
template <typename T> Var slice_batch(Graph<T>& g, Var x, int n);

/// Bilinear backward warp: out(n,c,y,x) = feat(n,c, y + v, x + u) with (u, v) the two
/// flow channels; samples outside [0,W-1]x[0,H-1] are zero. Differentiable in both inputs.
template <typename T> Var warp(Graph<T>& g, Var features, Var flow);

/// x2 bilinear upsampling with half-pixel centers and edge clamping.
template <typename T> Var upsample2x(Graph<T>& g, Var x);

/// Mean over mask-valid pixels of |pred_u - u| + |pred_v - v|; pred is (1,2,H,W).
template <typename T>
Var l1_mean(Graph<T>& g, Var pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask);

/// sum(x * weights); used to reduce tensors to scalars in gradient checks.
template <typename T> Var weighted_sum(Graph<T>& g, Var x, const Tensor<T>& weights);

}  // namespace evaflow::nn
