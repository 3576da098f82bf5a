#ifndef CSNN_BN_FUSION_HPP
#define CSNN_BN_FUSION_HPP

#include <cmath>

#include "csnn/graph.hpp"

namespace csnn {

struct FusedLayer {
	Tensor w;  // same shape as the source weights
	Tensor b;  // per output channel
};

/// Fold eval-mode batch normalization into the preceding linear layer:
/// W'_i = (gamma_i/s_i) W_i, b'_i = (gamma_i/s_i)(b_i - mu_i) + beta_i with
/// s_i = sqrt(sigma_i^2 + eps), matching the eval forward exactly.
inline FusedLayer fuse_batchnorm(const Tensor& w, const Tensor& b, const BatchNormParams& bn)
{
	bn.validate();
	const std::size_t c = bn.channels();
	if (w.rank() == 0 || w.shape[0] != c)
		throw usage_error("fuse: weights " + shape_str(w.shape) + " have " +
		                  std::to_string(w.rank() ? w.shape[0] : 0) + " output channels, batchnorm has " +
		                  std::to_string(c));
	if (b.numel() != c)
		throw usage_error("fuse: bias extent " + std::to_string(b.numel()) + " != " + std::to_string(c));
	FusedLayer out{Tensor(w.shape), Tensor(b.shape)};
	const std::size_t per = w.numel() / c;
	for (std::size_t i = 0; i < c; ++i) {
		const double sig = std::sqrt(bn.running_sigma.data[i] * bn.running_sigma.data[i] + bn.epsilon);
		if (!(sig > 0.0)) throw usage_error("fuse: non-positive effective sigma at channel " + std::to_string(i));
		const double scale = bn.gamma.data[i] / sig;
		const double* src = w.ptr() + i * per;
		double* dst = out.w.ptr() + i * per;
		for (std::size_t j = 0; j < per; ++j) dst[j] = scale * src[j];
		out.b.data[i] = scale * (b.data[i] - bn.running_mu.data[i]) + bn.beta.data[i];
	}
	return out;
}

/// Copy of the graph with every batchnorm folded into the conv or dense
/// layer it directly follows. The input graph is left untouched.
inline ModelGraph fuse_model(const ModelGraph& g)
{
	g.validate();
	ModelGraph out(g.input_shape);
	// old node index -> new node index (or the index its fused producer got)
	std::vector<int> remap(g.nodes.size());
	for (std::size_t i = 0; i < g.nodes.size(); ++i) {
		const LayerNode& n = g.nodes[i];
		const int mapped_input = n.input < 0 ? -1 : remap[n.input];
		if (const auto* bn = std::get_if<BatchNorm>(&n.layer)) {
			if (mapped_input < 0)
				throw usage_error("fuse: batchnorm at node " + std::to_string(i) +
				                  " does not follow a conv or dense layer");
			Layer& prev = out.nodes[mapped_input].layer;
			if (auto* conv = std::get_if<Conv2d>(&prev)) {
				FusedLayer f = fuse_batchnorm(conv->w, conv->b, bn->p);
				conv->w = std::move(f.w);
				conv->b = std::move(f.b);
			} else if (auto* dense = std::get_if<Dense>(&prev)) {
				FusedLayer f = fuse_batchnorm(dense->w, dense->b, bn->p);
				dense->w = std::move(f.w);
				dense->b = std::move(f.b);
			} else {
				throw usage_error("fuse: batchnorm at node " + std::to_string(i) + " follows " +
				                  layer_kind_name(prev) + ", expected conv or dense");
			}
			remap[i] = mapped_input;
			continue;
		}
		remap[i] = out.add(n.layer, mapped_input);
	}
	out.validate();
	return out;
}

}  // namespace csnn

#endif
