#ifndef CSNN_LAYERS_HPP
#define CSNN_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "csnn/clip.hpp"
#include "csnn/tensor.hpp"

namespace csnn {

enum class Mode { train, eval };

// Batched tensors carry the mini-batch as the leading axis; out_shape() and
// the shape checks below work on the per-sample shape.

// ---------------------------------------------------------------------------

struct ReLU {
	Tensor x_cache;

	Shape out_shape(const Shape& in) const { return in; }

	Tensor forward(const Tensor& x, Mode mode)
	{
		Tensor y(x.shape);
		for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
		if (mode == Mode::train) x_cache = x;
		return y;
	}

	Tensor backward(const Tensor& dy)
	{
		Tensor dx(dy.shape);
		for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] = x_cache.data[i] > 0.0 ? dy.data[i] : 0.0;
		return dx;
	}
};

// ---------------------------------------------------------------------------

/// Clamp at a trainable upper bound. Expects non-negative input (placed
/// directly after a ReLU), so the output lives in [0, lambda].
struct Clip {
	ClipParam param;
	Tensor x_cache;

	Shape out_shape(const Shape& in) const { return in; }

	Tensor forward(const Tensor& x, Mode mode)
	{
		if (param.lambda <= 0.0)
			throw usage_error("clip: lambda must be positive, got " + std::to_string(param.lambda));
		const double lam = param.lambda;
		Tensor y(x.shape);
		for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = clipped(x.data[i], lam) ? lam : x.data[i];
		if (mode == Mode::train) x_cache = x;
		return y;
	}

	Tensor backward(const Tensor& dy)
	{
		const double lam = param.lambda;
		Tensor dx(dy.shape);
		for (std::size_t i = 0; i < dy.numel(); ++i) {
			if (clipped(x_cache.data[i], lam))
				param.grad += dy.data[i];
			else
				dx.data[i] = dy.data[i];
		}
		return dx;
	}
};

// ---------------------------------------------------------------------------

/// Fully connected layer; higher-rank inputs are flattened per sample.
struct Dense {
	std::size_t in_features = 0;
	std::size_t out_features = 0;
	Tensor w;  // [out, in]
	Tensor b;  // [out]
	Tensor gw, gb;
	Tensor x_cache;   // [N, in]
	Shape in_shape_cache;

	Dense() = default;
	Dense(std::size_t in_f, std::size_t out_f)
	    : in_features(in_f),
	      out_features(out_f),
	      w(Shape{out_f, in_f}),
	      b(Shape{out_f}),
	      gw(Shape{out_f, in_f}),
	      gb(Shape{out_f})
	{
	}

	Shape out_shape(const Shape& in) const
	{
		if (shape_numel(in) != in_features)
			throw usage_error("dense: input " + shape_str(in) + " has " + std::to_string(shape_numel(in)) +
			                  " values, expected " + std::to_string(in_features));
		return {out_features};
	}

	Tensor forward(const Tensor& x, Mode mode)
	{
		const std::size_t n = x.shape[0];
		Tensor y(Shape{n, out_features});
		gemm_nt(x.ptr(), w.ptr(), y.ptr(), n, in_features, out_features, false);
		for (std::size_t i = 0; i < n; ++i) {
			double* row = y.ptr() + i * out_features;
			for (std::size_t j = 0; j < out_features; ++j) row[j] += b.data[j];
		}
		if (mode == Mode::train) {
			in_shape_cache = x.shape;
			x_cache = x;
			x_cache.shape = {n, in_features};
		}
		return y;
	}

	Tensor backward(const Tensor& dy)
	{
		const std::size_t n = dy.shape[0];
		gemm_tn(dy.ptr(), x_cache.ptr(), gw.ptr(), out_features, n, in_features, true);
		for (std::size_t i = 0; i < n; ++i) {
			const double* row = dy.ptr() + i * out_features;
			for (std::size_t j = 0; j < out_features; ++j) gb.data[j] += row[j];
		}
		Tensor dx(in_shape_cache);
		gemm_nn(dy.ptr(), w.ptr(), dx.ptr(), n, out_features, in_features, false);
		return dx;
	}
};

// ---------------------------------------------------------------------------

struct Conv2d {
	std::size_t in_c = 0, out_c = 0, kh = 0, kw = 0, stride = 1, pad = 0;
	Tensor w;  // [out_c, in_c, kh, kw]
	Tensor b;  // [out_c]
	Tensor gw, gb;
	std::vector<double> cols;  // im2col buffer, [N][K][P] with K = in_c*kh*kw
	Shape in_shape_cache;

	Conv2d() = default;
	Conv2d(std::size_t ic, std::size_t oc, std::size_t k, std::size_t s = 1, std::size_t p = 0)
	    : in_c(ic),
	      out_c(oc),
	      kh(k),
	      kw(k),
	      stride(s),
	      pad(p),
	      w(Shape{oc, ic, k, k}),
	      b(Shape{oc}),
	      gw(Shape{oc, ic, k, k}),
	      gb(Shape{oc})
	{
	}

	Shape out_shape(const Shape& in) const
	{
		if (in.size() != 3)
			throw usage_error("conv: expected rank-3 input (C,H,W), got " + shape_str(in));
		if (in[0] != in_c)
			throw usage_error("conv: input has " + std::to_string(in[0]) + " channels, expected " +
			                  std::to_string(in_c));
		const std::size_t h = in[1] + 2 * pad, w_ = in[2] + 2 * pad;
		if (h < kh || w_ < kw || (h - kh) % stride != 0 || (w_ - kw) % stride != 0)
			throw usage_error("conv: geometry mismatch, input " + shape_str(in) + " with kernel " +
			                  std::to_string(kh) + "x" + std::to_string(kw) + " stride " +
			                  std::to_string(stride) + " pad " + std::to_string(pad));
		return {out_c, (h - kh) / stride + 1, (w_ - kw) / stride + 1};
	}

	std::size_t col_rows() const { return in_c * kh * kw; }

	void im2col(const double* x, std::size_t h, std::size_t w_, std::size_t oh, std::size_t ow,
	            double* col) const
	{
		for (std::size_t c = 0; c < in_c; ++c) {
			for (std::size_t ki = 0; ki < kh; ++ki) {
				for (std::size_t kj = 0; kj < kw; ++kj) {
					double* dst = col + ((c * kh + ki) * kw + kj) * (oh * ow);
					for (std::size_t i = 0; i < oh; ++i) {
						const long ih = static_cast<long>(i * stride + ki) - static_cast<long>(pad);
						if (ih < 0 || ih >= static_cast<long>(h)) {
							std::fill(dst, dst + ow, 0.0);
							dst += ow;
							continue;
						}
						const double* src = x + (c * h + ih) * w_;
						for (std::size_t j = 0; j < ow; ++j) {
							const long iw = static_cast<long>(j * stride + kj) - static_cast<long>(pad);
							*dst++ = (iw < 0 || iw >= static_cast<long>(w_)) ? 0.0 : src[iw];
						}
					}
				}
			}
		}
	}

	void col2im(const double* col, std::size_t h, std::size_t w_, std::size_t oh, std::size_t ow,
	            double* x) const
	{
		for (std::size_t c = 0; c < in_c; ++c) {
			for (std::size_t ki = 0; ki < kh; ++ki) {
				for (std::size_t kj = 0; kj < kw; ++kj) {
					const double* src = col + ((c * kh + ki) * kw + kj) * (oh * ow);
					for (std::size_t i = 0; i < oh; ++i) {
						const long ih = static_cast<long>(i * stride + ki) - static_cast<long>(pad);
						if (ih < 0 || ih >= static_cast<long>(h)) {
							src += ow;
							continue;
						}
						double* dst = x + (c * h + ih) * w_;
						for (std::size_t j = 0; j < ow; ++j) {
							const long iw = static_cast<long>(j * stride + kj) - static_cast<long>(pad);
							if (iw >= 0 && iw < static_cast<long>(w_)) dst[iw] += src[j];
						}
						src += ow;
					}
				}
			}
		}
	}

	Tensor forward(const Tensor& x, Mode mode)
	{
		const std::size_t n = x.shape[0], h = x.shape[2], w_ = x.shape[3];
		const Shape os = out_shape({x.shape[1], h, w_});
		const std::size_t oh = os[1], ow = os[2], p = oh * ow, k = col_rows();
		cols.resize(n * k * p);
		Tensor y(Shape{n, out_c, oh, ow});
		for (std::size_t i = 0; i < n; ++i) {
			double* col = cols.data() + i * k * p;
			im2col(x.ptr() + i * in_c * h * w_, h, w_, oh, ow, col);
			double* yrow = y.ptr() + i * out_c * p;
			gemm_nn(w.ptr(), col, yrow, out_c, k, p, false);
			for (std::size_t oc = 0; oc < out_c; ++oc) {
				const double bias = b.data[oc];
				double* dst = yrow + oc * p;
				for (std::size_t j = 0; j < p; ++j) dst[j] += bias;
			}
		}
		if (mode == Mode::train) in_shape_cache = x.shape;
		return y;
	}

	Tensor backward(const Tensor& dy)
	{
		const std::size_t n = in_shape_cache[0], h = in_shape_cache[2], w_ = in_shape_cache[3];
		const std::size_t oh = dy.shape[2], ow = dy.shape[3], p = oh * ow, k = col_rows();
		Tensor dx(in_shape_cache);
		std::vector<double> dcol(k * p);
		for (std::size_t i = 0; i < n; ++i) {
			const double* dyrow = dy.ptr() + i * out_c * p;
			const double* col = cols.data() + i * k * p;
			gemm_nt(dyrow, col, gw.ptr(), out_c, p, k, true);
			for (std::size_t oc = 0; oc < out_c; ++oc) {
				const double* src = dyrow + oc * p;
				double acc = 0.0;
				for (std::size_t j = 0; j < p; ++j) acc += src[j];
				gb.data[oc] += acc;
			}
			gemm_tn(w.ptr(), dyrow, dcol.data(), k, out_c, p, false);
			col2im(dcol.data(), h, w_, oh, ow, dx.ptr() + i * in_c * h * w_);
		}
		return dx;
	}
};

// ---------------------------------------------------------------------------

/// Non-overlapping k x k window mean; spatial extents must divide evenly.
struct AvgPool2d {
	std::size_t k = 2;
	Shape in_shape_cache;

	AvgPool2d() = default;
	explicit AvgPool2d(std::size_t k_) : k(k_) {}

	Shape out_shape(const Shape& in) const
	{
		if (in.size() != 3)
			throw usage_error("avg_pool: expected rank-3 input (C,H,W), got " + shape_str(in));
		if (k == 0 || in[1] % k != 0 || in[2] % k != 0)
			throw usage_error("avg_pool: input " + shape_str(in) + " not divisible by window " +
			                  std::to_string(k));
		return {in[0], in[1] / k, in[2] / k};
	}

	Tensor forward(const Tensor& x, Mode mode)
	{
		const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
		const std::size_t oh = h / k, ow = w / k;
		const double inv = 1.0 / static_cast<double>(k * k);
		Tensor y(Shape{n, c, oh, ow});
		for (std::size_t img = 0; img < n * c; ++img) {
			const double* src = x.ptr() + img * h * w;
			double* dst = y.ptr() + img * oh * ow;
			for (std::size_t i = 0; i < oh; ++i)
				for (std::size_t j = 0; j < ow; ++j) {
					double acc = 0.0;
					for (std::size_t di = 0; di < k; ++di)
						for (std::size_t dj = 0; dj < k; ++dj) acc += src[(i * k + di) * w + j * k + dj];
					dst[i * ow + j] = acc * inv;
				}
		}
		if (mode == Mode::train) in_shape_cache = x.shape;
		return y;
	}

	Tensor backward(const Tensor& dy)
	{
		const std::size_t n = in_shape_cache[0], c = in_shape_cache[1];
		const std::size_t h = in_shape_cache[2], w = in_shape_cache[3];
		const std::size_t oh = h / k, ow = w / k;
		const double inv = 1.0 / static_cast<double>(k * k);
		Tensor dx(in_shape_cache);
		for (std::size_t img = 0; img < n * c; ++img) {
			const double* src = dy.ptr() + img * oh * ow;
			double* dst = dx.ptr() + img * h * w;
			for (std::size_t i = 0; i < oh; ++i)
				for (std::size_t j = 0; j < ow; ++j) {
					const double g = src[i * ow + j] * inv;
					for (std::size_t di = 0; di < k; ++di)
						for (std::size_t dj = 0; dj < k; ++dj) dst[(i * k + di) * w + j * k + dj] += g;
				}
		}
		return dx;
	}
};

// ---------------------------------------------------------------------------

/// Per-channel affine normalization parameters. running_sigma stores the
/// standard deviation; the epsilon stabilizer is applied as sqrt(sigma^2+eps)
/// wherever the statistics are used.
struct BatchNormParams {
	Tensor gamma, beta, running_mu, running_sigma;
	double epsilon = 1e-5;

	BatchNormParams() = default;
	explicit BatchNormParams(std::size_t channels, double eps = 1e-5)
	    : gamma(Tensor::full({channels}, 1.0)),
	      beta(Shape{channels}),
	      running_mu(Shape{channels}),
	      running_sigma(Tensor::full({channels}, 1.0)),
	      epsilon(eps)
	{
	}

	std::size_t channels() const { return gamma.numel(); }

	void validate() const
	{
		const std::size_t c = gamma.numel();
		if (beta.numel() != c || running_mu.numel() != c || running_sigma.numel() != c)
			throw usage_error("batchnorm: per-channel extents differ");
		if (epsilon < 0.0) throw usage_error("batchnorm: epsilon must be non-negative");
		for (double s : running_sigma.data)
			if (!(s > 0.0)) throw usage_error("batchnorm: running sigma must be strictly positive");
	}
};

/// Batch normalization over the batch and spatial axes. Training uses batch
/// statistics and updates the running ones; eval uses the running statistics.
struct BatchNorm {
	BatchNormParams p;
	double momentum = 0.1;
	Tensor ggamma, gbeta;
	Tensor xhat_cache;          // [N,C,S]
	std::vector<double> sigma_b;  // batch sqrt(var+eps), per channel

	BatchNorm() = default;
	explicit BatchNorm(std::size_t channels, double eps = 1e-5)
	    : p(channels, eps), ggamma(Shape{channels}), gbeta(Shape{channels})
	{
	}

	Shape out_shape(const Shape& in) const
	{
		if (in.empty() || in[0] != p.channels())
			throw usage_error("batchnorm: input " + shape_str(in) + " does not provide " +
			                  std::to_string(p.channels()) + " channels");
		return in;
	}

	// spatial size per channel; rank-2 inputs have s == 1
	static std::size_t spatial(const Shape& batched)
	{
		std::size_t s = 1;
		for (std::size_t i = 2; i < batched.size(); ++i) s *= batched[i];
		return s;
	}

	Tensor forward(const Tensor& x, Mode mode)
	{
		const std::size_t n = x.shape[0], c = x.shape[1], s = spatial(x.shape);
		const double m = static_cast<double>(n * s);
		Tensor y(x.shape);
		if (mode == Mode::eval) {
			for (std::size_t ch = 0; ch < c; ++ch) {
				const double sig = std::sqrt(p.running_sigma.data[ch] * p.running_sigma.data[ch] + p.epsilon);
				const double scale = p.gamma.data[ch] / sig;
				const double shift = p.beta.data[ch] - scale * p.running_mu.data[ch];
				for (std::size_t i = 0; i < n; ++i) {
					const double* src = x.ptr() + (i * c + ch) * s;
					double* dst = y.ptr() + (i * c + ch) * s;
					for (std::size_t j = 0; j < s; ++j) dst[j] = scale * src[j] + shift;
				}
			}
			return y;
		}
		xhat_cache = Tensor(x.shape);
		sigma_b.assign(c, 0.0);
		for (std::size_t ch = 0; ch < c; ++ch) {
			double mean = 0.0;
			for (std::size_t i = 0; i < n; ++i) {
				const double* src = x.ptr() + (i * c + ch) * s;
				for (std::size_t j = 0; j < s; ++j) mean += src[j];
			}
			mean /= m;
			double var = 0.0;
			for (std::size_t i = 0; i < n; ++i) {
				const double* src = x.ptr() + (i * c + ch) * s;
				for (std::size_t j = 0; j < s; ++j) {
					const double d = src[j] - mean;
					var += d * d;
				}
			}
			var /= m;
			const double sig = std::sqrt(var + p.epsilon);
			sigma_b[ch] = sig;
			const double g = p.gamma.data[ch], bt = p.beta.data[ch];
			for (std::size_t i = 0; i < n; ++i) {
				const double* src = x.ptr() + (i * c + ch) * s;
				double* xh = xhat_cache.ptr() + (i * c + ch) * s;
				double* dst = y.ptr() + (i * c + ch) * s;
				for (std::size_t j = 0; j < s; ++j) {
					xh[j] = (src[j] - mean) / sig;
					dst[j] = g * xh[j] + bt;
				}
			}
			p.running_mu.data[ch] = (1.0 - momentum) * p.running_mu.data[ch] + momentum * mean;
			p.running_sigma.data[ch] =
			    (1.0 - momentum) * p.running_sigma.data[ch] + momentum * std::sqrt(var);
		}
		return y;
	}

	Tensor backward(const Tensor& dy)
	{
		const std::size_t n = dy.shape[0], c = dy.shape[1], s = spatial(dy.shape);
		const double m = static_cast<double>(n * s);
		Tensor dx(dy.shape);
		for (std::size_t ch = 0; ch < c; ++ch) {
			double sum_dy = 0.0, sum_dy_xhat = 0.0;
			for (std::size_t i = 0; i < n; ++i) {
				const double* g = dy.ptr() + (i * c + ch) * s;
				const double* xh = xhat_cache.ptr() + (i * c + ch) * s;
				for (std::size_t j = 0; j < s; ++j) {
					sum_dy += g[j];
					sum_dy_xhat += g[j] * xh[j];
				}
			}
			ggamma.data[ch] += sum_dy_xhat;
			gbeta.data[ch] += sum_dy;
			const double scale = p.gamma.data[ch] / sigma_b[ch];
			const double mean_dy = sum_dy / m, mean_dy_xhat = sum_dy_xhat / m;
			for (std::size_t i = 0; i < n; ++i) {
				const double* g = dy.ptr() + (i * c + ch) * s;
				const double* xh = xhat_cache.ptr() + (i * c + ch) * s;
				double* d = dx.ptr() + (i * c + ch) * s;
				for (std::size_t j = 0; j < s; ++j) d[j] = scale * (g[j] - mean_dy - xh[j] * mean_dy_xhat);
			}
		}
		return dx;
	}
};

}  // namespace csnn

#endif
