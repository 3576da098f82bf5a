#ifndef CSNN_LOSS_HPP
#define CSNN_LOSS_HPP

#include <cmath>
#include <vector>

#include "csnn/tensor.hpp"

namespace csnn {

struct LossResult {
	double loss = 0.0;  // mean over the batch
	Tensor dlogits;     // (softmax - onehot) / batch
};

/// Numerically stable softmax cross-entropy on [N, classes] logits.
inline LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels)
{
	if (logits.rank() != 2)
		throw usage_error("loss: expected [batch, classes] logits, got " + shape_str(logits.shape));
	const std::size_t n = logits.shape[0], c = logits.shape[1];
	if (labels.size() != n)
		throw usage_error("loss: " + std::to_string(labels.size()) + " labels for batch of " +
		                  std::to_string(n));
	LossResult r;
	r.dlogits = Tensor(logits.shape);
	const double inv_n = 1.0 / static_cast<double>(n);
	for (std::size_t i = 0; i < n; ++i) {
		if (labels[i] >= c)
			throw data_error("loss: label " + std::to_string(labels[i]) + " out of range for " +
			                 std::to_string(c) + " classes");
		const double* row = logits.ptr() + i * c;
		double m = row[0];
		for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
		double sum = 0.0;
		for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - m);
		const double lse = m + std::log(sum);
		r.loss += (lse - row[labels[i]]) * inv_n;
		double* g = r.dlogits.ptr() + i * c;
		for (std::size_t j = 0; j < c; ++j) {
			const double p = std::exp(row[j] - lse);
			g[j] = (p - (j == labels[i] ? 1.0 : 0.0)) * inv_n;
		}
	}
	return r;
}

}  // namespace csnn

#endif
