#ifndef CSNN_TENSOR_HPP
#define CSNN_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "csnn/error.hpp"

namespace csnn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s)
{
	std::size_t n = 1;
	for (std::size_t d : s) n *= d;
	return n;
}

inline std::string shape_str(const Shape& s)
{
	std::string out = "[";
	for (std::size_t i = 0; i < s.size(); ++i) {
		if (i) out += ",";
		out += std::to_string(s[i]);
	}
	return out + "]";
}

/// Dense N-dimensional array of doubles, row-major.
struct Tensor {
	Shape shape;
	std::vector<double> data;

	Tensor() = default;
	explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}
	Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d))
	{
		if (shape_numel(shape) != data.size())
			throw usage_error("tensor: shape " + shape_str(shape) + " does not match " +
			                  std::to_string(data.size()) + " values");
	}

	static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
	static Tensor full(Shape s, double v)
	{
		Tensor t(std::move(s));
		std::fill(t.data.begin(), t.data.end(), v);
		return t;
	}

	std::size_t numel() const { return data.size(); }
	std::size_t rank() const { return shape.size(); }
	bool empty() const { return data.empty(); }

	double* ptr() { return data.data(); }
	const double* ptr() const { return data.data(); }

	double& operator[](std::size_t i) { return data[i]; }
	double operator[](std::size_t i) const { return data[i]; }

	bool same_shape(const Tensor& o) const { return shape == o.shape; }

	void fill(double v) { std::fill(data.begin(), data.end(), v); }

	bool all_finite() const
	{
		for (double v : data)
			if (!std::isfinite(v)) return false;
		return true;
	}

	double sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }
	double max_abs() const
	{
		double m = 0.0;
		for (double v : data) m = std::max(m, std::fabs(v));
		return m;
	}
};

/// Index of the largest element; ties resolve to the lowest index.
inline std::size_t argmax(const double* v, std::size_t n)
{
	std::size_t best = 0;
	for (std::size_t i = 1; i < n; ++i)
		if (v[i] > v[best]) best = i;
	return best;
}

// ---------------------------------------------------------------------------
// Row-major matrix products. Each output element is accumulated in a fixed
// sequential order, so results are bit-reproducible.

/// C[M,N] (+)= A[M,K] * B[K,N]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate)
{
	if (!accumulate) std::fill(c, c + m * n, 0.0);
	for (std::size_t i = 0; i < m; ++i) {
		const double* arow = a + i * k;
		double* crow = c + i * n;
		for (std::size_t p = 0; p < k; ++p) {
			const double av = arow[p];
			if (av == 0.0) continue;
			const double* brow = b + p * n;
			for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
		}
	}
}

/// C[M,N] (+)= A[M,K] * B^T, with B stored [N,K]
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate)
{
	for (std::size_t i = 0; i < m; ++i) {
		const double* arow = a + i * k;
		double* crow = c + i * n;
		for (std::size_t j = 0; j < n; ++j) {
			const double* brow = b + j * k;
			double acc = 0.0;
			for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
			crow[j] = accumulate ? crow[j] + acc : acc;
		}
	}
}

/// C[M,N] (+)= A^T * B, with A stored [K,M] and B stored [K,N]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate)
{
	if (!accumulate) std::fill(c, c + m * n, 0.0);
	for (std::size_t p = 0; p < k; ++p) {
		const double* arow = a + p * m;
		const double* brow = b + p * n;
		for (std::size_t i = 0; i < m; ++i) {
			const double av = arow[i];
			if (av == 0.0) continue;
			double* crow = c + i * n;
			for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
		}
	}
}

}  // namespace csnn

#endif
