#ifndef CSNN_TEST_HELPERS_HPP
#define CSNN_TEST_HELPERS_HPP

#include <cstddef>
#include <random>
#include <vector>

#include "csnn/csnn.hpp"

namespace testutil {

inline void randomize(csnn::Tensor& t, std::mt19937_64& rng, double scale = 1.0)
{
	std::normal_distribution<double> d(0.0, scale);
	for (double& v : t.data) v = d(rng);
}

/// Reference matrix products, plain triple loops.
inline void naive_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n)
{
	for (std::size_t i = 0; i < m; ++i)
		for (std::size_t j = 0; j < n; ++j) {
			double s = 0.0;
			for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
			c[i * n + j] = s;
		}
}

inline void naive_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n)
{
	for (std::size_t i = 0; i < m; ++i)
		for (std::size_t j = 0; j < n; ++j) {
			double s = 0.0;
			for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[j * k + l];
			c[i * n + j] = s;
		}
}

inline void naive_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n)
{
	for (std::size_t i = 0; i < m; ++i)
		for (std::size_t j = 0; j < n; ++j) {
			double s = 0.0;
			for (std::size_t l = 0; l < k; ++l) s += a[l * m + i] * b[l * n + j];
			c[i * n + j] = s;
		}
}

/// Reference 2d convolution, direct sliding window over a batched input.
inline csnn::Tensor naive_conv2d(const csnn::Tensor& x, const csnn::Tensor& w,
                                 const csnn::Tensor& b, std::size_t stride, std::size_t pad)
{
	const std::size_t n = x.shape[0], ic = x.shape[1], h = x.shape[2], wd = x.shape[3];
	const std::size_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3];
	const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
	const std::size_t ow = (wd + 2 * pad - kw) / stride + 1;
	csnn::Tensor y(csnn::Shape{n, oc, oh, ow});
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t o = 0; o < oc; ++o)
			for (std::size_t yy = 0; yy < oh; ++yy)
				for (std::size_t xx = 0; xx < ow; ++xx) {
					double s = b.data[o];
					for (std::size_t c = 0; c < ic; ++c)
						for (std::size_t ky = 0; ky < kh; ++ky)
							for (std::size_t kx = 0; kx < kw; ++kx) {
								const long sy = static_cast<long>(yy * stride + ky) - static_cast<long>(pad);
								const long sx = static_cast<long>(xx * stride + kx) - static_cast<long>(pad);
								if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(wd))
									continue;
								s += x.data[((i * ic + c) * h + sy) * wd + sx] *
								     w.data[((o * ic + c) * kh + ky) * kw + kx];
							}
					y.data[((i * oc + o) * oh + yy) * ow + xx] = s;
				}
	return y;
}

/// Scalar loss used by the finite-difference checks: sum of fixed random
/// weights times the output, so every output coordinate matters.
struct ProbeLoss {
	std::vector<double> coeff;

	explicit ProbeLoss(std::size_t n, std::uint64_t seed)
	{
		std::mt19937_64 rng(seed);
		std::uniform_real_distribution<double> d(-1.0, 1.0);
		coeff.resize(n);
		for (double& v : coeff) v = d(rng);
	}

	double value(const csnn::Tensor& y) const
	{
		double s = 0.0;
		for (std::size_t i = 0; i < y.numel(); ++i) s += coeff[i] * y.data[i];
		return s;
	}

	csnn::Tensor grad(const csnn::Shape& shape) const
	{
		csnn::Tensor g(shape);
		for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] = coeff[i];
		return g;
	}
};

/// Largest relative mismatch between an analytic gradient vector and central
/// finite differences of the probe loss with respect to every parameter,
/// including clip thresholds.
inline double max_grad_mismatch(csnn::ModelGraph& g, const csnn::Tensor& x, double fd_eps = 1e-6)
{
	using namespace csnn;
	Tensor out = g.forward_all(x, Mode::train).back();
	ProbeLoss probe(out.numel(), 777);
	g.zero_grads();
	g.backward(probe.grad(out.shape));

	std::vector<double*> vals;
	std::vector<double> analytic;
	for_each_param(g, [&](Tensor& w, Tensor& gr) {
		for (std::size_t i = 0; i < w.numel(); ++i) {
			vals.push_back(&w.data[i]);
			analytic.push_back(gr.data[i]);
		}
	});
	for_each_clip(g, [&](ClipParam& c) {
		vals.push_back(&c.lambda);
		analytic.push_back(c.grad);
	});

	// finite differences rerun the training-mode forward: batchnorm output
	// depends on batch statistics there, which is what backward differentiates
	double worst = 0.0;
	for (std::size_t i = 0; i < vals.size(); ++i) {
		const double keep = *vals[i];
		*vals[i] = keep + fd_eps;
		const double up = probe.value(g.forward(x, Mode::train));
		*vals[i] = keep - fd_eps;
		const double dn = probe.value(g.forward(x, Mode::train));
		*vals[i] = keep;
		const double fd = (up - dn) / (2.0 * fd_eps);
		const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1.0});
		worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
	}
	return worst;
}

}  // namespace testutil

#endif
