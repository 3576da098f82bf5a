#ifndef CSNN_CLIP_HPP
#define CSNN_CLIP_HPP

#include <cstddef>

#include "csnn/tensor.hpp"

namespace csnn {

/// Trainable upper clipping bound of one clip layer. `lambda` doubles as the
/// layer's norm-factor when the network is converted to a spiking one.
struct ClipParam {
	double lambda = 4.0;
	double grad = 0.0;
};

// Activations at or above lambda belong to the clipped branch: they stop
// gradients to the input and route them to lambda instead.
inline bool clipped(double a, double lambda) { return a >= lambda; }

/// Elementwise min(a, lambda). Inputs are expected non-negative (the layer
/// sits directly after a ReLU).
inline Tensor clip_forward(const Tensor& a, double lambda)
{
	if (lambda <= 0.0) throw usage_error("clip: lambda must be positive, got " + std::to_string(lambda));
	Tensor out(a.shape);
	for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = clipped(a.data[i], lambda) ? lambda : a.data[i];
	return out;
}

struct ClipGrads {
	Tensor grad_a;
	double grad_lambda = 0.0;
};

/// Gradients of the clip: upstream passes through below lambda, and the
/// clipped elements contribute their upstream gradient to lambda.
inline ClipGrads clip_backward(const Tensor& a, double lambda, const Tensor& upstream)
{
	if (lambda <= 0.0) throw usage_error("clip: lambda must be positive, got " + std::to_string(lambda));
	if (!a.same_shape(upstream))
		throw usage_error("clip: activation shape " + shape_str(a.shape) + " does not match upstream " +
		                  shape_str(upstream.shape));
	ClipGrads g;
	g.grad_a = Tensor(a.shape);
	for (std::size_t i = 0; i < a.numel(); ++i) {
		if (clipped(a.data[i], lambda))
			g.grad_lambda += upstream.data[i];
		else
			g.grad_a.data[i] = upstream.data[i];
	}
	return g;
}

}  // namespace csnn

#endif
