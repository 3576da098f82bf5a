#ifndef CSNN_CONVERTER_HPP
#define CSNN_CONVERTER_HPP

#include <random>

#include "csnn/bn_fusion.hpp"
#include "csnn/snn.hpp"
#include "csnn/trainer.hpp"

namespace csnn {

struct NormFactorStrategy {
	enum class Kind { tcl, percentile, max };
	Kind kind = Kind::tcl;
	double p = 0.999;  // percentile only

	static NormFactorStrategy parse(const std::string& s)
	{
		NormFactorStrategy st;
		if (s == "tcl") {
			st.kind = Kind::tcl;
		} else if (s == "max") {
			st.kind = Kind::max;
		} else if (s.rfind("percentile", 0) == 0) {
			st.kind = Kind::percentile;
			if (s.size() > 10) {
				if (s[10] != ':')
					throw usage_error("strategy: expected percentile:P, got '" + s + "'");
				try {
					st.p = std::stod(s.substr(11));
				} catch (const std::exception&) {
					throw usage_error("strategy: bad percentile value in '" + s + "'");
				}
			}
			if (!(st.p > 0.0) || st.p > 1.0)
				throw usage_error("strategy: percentile must be in (0,1], got " + std::to_string(st.p));
		} else {
			throw usage_error("strategy: unknown '" + s + "' (tcl, percentile[:P], max)");
		}
		return st;
	}

	std::string str() const
	{
		switch (kind) {
			case Kind::tcl: return "tcl";
			case Kind::max: return "max";
			default: {
				char buf[48];
				std::snprintf(buf, sizeof buf, "percentile:%g", p);
				return buf;
			}
		}
	}
};

/// How a chain graph maps onto spiking layers: the weighted layers in order,
/// and for every hidden weighted layer the relu (and clip, if any) that
/// follows it before the next weighted layer.
struct ConversionPlan {
	std::vector<std::size_t> weighted;  // node indices of conv/dense layers
	std::vector<int> relu_after;        // per hidden weighted layer, -1 if none
	std::vector<int> clip_after;        // per hidden weighted layer, -1 if none

	std::size_t taps() const { return weighted.empty() ? 0 : weighted.size() - 1; }
};

/// Analyze a chain graph for conversion. Requires every node to consume its
/// predecessor and every hidden weighted layer to be followed by a relu.
inline ConversionPlan analyze_for_conversion(const ModelGraph& g)
{
	g.validate();
	for (std::size_t i = 0; i < g.nodes.size(); ++i)
		if (g.nodes[i].input != static_cast<int>(i) - 1)
			throw usage_error("convert: node " + std::to_string(i) +
			                  " breaks the chain; conversion supports straight-line graphs only");
	ConversionPlan plan;
	for (std::size_t i = 0; i < g.nodes.size(); ++i)
		if (std::holds_alternative<Conv2d>(g.nodes[i].layer) ||
		    std::holds_alternative<Dense>(g.nodes[i].layer))
			plan.weighted.push_back(i);
	if (plan.weighted.empty()) throw usage_error("convert: graph has no conv or dense layers");
	if (plan.weighted.back() != g.nodes.size() - 1)
		throw usage_error("convert: the terminal layer must be conv or dense");
	for (std::size_t wi = 0; wi + 1 < plan.weighted.size(); ++wi) {
		int relu = -1, clip = -1;
		for (std::size_t i = plan.weighted[wi] + 1; i < plan.weighted[wi + 1]; ++i) {
			if (std::holds_alternative<ReLU>(g.nodes[i].layer)) relu = static_cast<int>(i);
			if (std::holds_alternative<Clip>(g.nodes[i].layer)) clip = static_cast<int>(i);
		}
		if (relu < 0)
			throw usage_error("convert: weighted layer at node " + std::to_string(plan.weighted[wi]) +
			                  " has no relu before the next weighted layer");
		plan.relu_after.push_back(relu);
		plan.clip_after.push_back(clip);
	}
	return plan;
}

/// Per-tap activation sample (ascending) and exact maximum, collected after
/// each hidden relu and before any clip.
struct ActivationStats {
	std::vector<std::vector<double>> samples;
	std::vector<double> a_max;
};

/// Calibration pass: run up to max_samples through the model in eval mode
/// and reservoir-sample post-relu activations per tap (cap values per tap).
/// The exact maximum always survives into the sorted sample.
inline ActivationStats collect_activation_stats(ModelGraph& g, const LabeledDataset& calib,
                                                const Normalization& norm = {},
                                                std::size_t max_samples = 10000,
                                                std::size_t cap = 1000000,
                                                std::uint64_t seed = 42)
{
	const ConversionPlan plan = analyze_for_conversion(g);
	if (calib.size() == 0) throw data_error("calibrate: empty dataset");
	const std::size_t use = std::min(max_samples, calib.size());
	ActivationStats stats;
	stats.samples.resize(plan.taps());
	stats.a_max.assign(plan.taps(), 0.0);
	std::vector<std::mt19937_64> rngs;
	std::vector<std::size_t> seen(plan.taps(), 0);
	for (std::size_t t = 0; t < plan.taps(); ++t)
		rngs.emplace_back(seed + 0x9e3779b97f4a7c15ull * (t + 1));

	const std::size_t batch = 256;
	for (std::size_t start = 0; start < use; start += batch) {
		const std::size_t n = std::min(batch, use - start);
		std::vector<std::size_t> idx(n);
		for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
		const Tensor x = calib.make_batch(idx, norm.mean, norm.stddev);
		const std::vector<Tensor> outs = g.forward_all(x, Mode::eval);
		for (std::size_t t = 0; t < plan.taps(); ++t) {
			const Tensor& act = outs[plan.relu_after[t]];
			auto& sample = stats.samples[t];
			sample.reserve(std::min(cap, sample.size() + act.numel()));
			for (double v : act.data) {
				stats.a_max[t] = std::max(stats.a_max[t], v);
				++seen[t];
				if (sample.size() < cap) {
					sample.push_back(v);
				} else {
					const std::size_t j = rngs[t]() % seen[t];
					if (j < cap) sample[j] = v;
				}
			}
		}
	}
	for (std::size_t t = 0; t < plan.taps(); ++t) {
		auto& sample = stats.samples[t];
		std::sort(sample.begin(), sample.end());
		if (!sample.empty() && sample.back() < stats.a_max[t]) sample.back() = stats.a_max[t];
	}
	return stats;
}

/// Index a sorted ascending sample at percentile p in (0,1]:
/// element ceil(p*n) - 1, so p=1 is the maximum.
inline double percentile_of_sorted(const std::vector<double>& sorted, double p)
{
	if (sorted.empty()) throw usage_error("percentile: empty sample");
	if (!(p > 0.0) || p > 1.0) throw usage_error("percentile: p must be in (0,1]");
	const double scaled = p * static_cast<double>(sorted.size());
	std::size_t idx = static_cast<std::size_t>(std::ceil(scaled));
	if (idx == 0) idx = 1;
	if (idx > sorted.size()) idx = sorted.size();
	return sorted[idx - 1];
}

/// One norm factor per hidden weighted layer (equivalently, per clip
/// position). tcl reads the trained thresholds directly; percentile/max need
/// a calibration dataset.
inline std::vector<double> collect_norm_factors(ModelGraph& g, const NormFactorStrategy& strategy,
                                                const LabeledDataset* calib = nullptr,
                                                const Normalization& norm = {},
                                                std::uint64_t seed = 42)
{
	const ConversionPlan plan = analyze_for_conversion(g);
	std::vector<double> lambdas;
	if (strategy.kind == NormFactorStrategy::Kind::tcl) {
		for (std::size_t t = 0; t < plan.taps(); ++t) {
			if (plan.clip_after[t] < 0)
				throw usage_error("convert: tcl strategy needs a clip layer after weighted layer " +
				                  std::to_string(plan.weighted[t]) + ", none found");
			lambdas.push_back(std::get<Clip>(g.nodes[plan.clip_after[t]].layer).param.lambda);
		}
		return lambdas;
	}
	if (calib == nullptr || calib->size() == 0)
		throw usage_error("convert: strategy '" + strategy.str() + "' requires a calibration dataset");
	const ActivationStats stats = collect_activation_stats(g, *calib, norm, 10000, 1000000, seed);
	for (std::size_t t = 0; t < plan.taps(); ++t) {
		const double lam = strategy.kind == NormFactorStrategy::Kind::max
		                       ? stats.a_max[t]
		                       : percentile_of_sorted(stats.samples[t], strategy.p);
		if (!(lam > 0.0))
			throw data_error("convert: calibration produced non-positive norm factor " +
			                 std::to_string(lam) + " at tap " + std::to_string(t));
		lambdas.push_back(lam);
	}
	return lambdas;
}

inline void fold_input_norm_conv(Conv2d& c, const Normalization& norm);
inline void fold_input_norm_dense(Dense& d, const Normalization& norm, const Shape& input_shape);

/// Largest single-step drive the terminal layer can produce when its inputs
/// are spike rates in [0,1]: max over units of sum(positive weights) times
/// the incoming factor plus positive bias. Scaling the layer down by this
/// keeps every output neuron below threshold each step, so spike counts
/// order the logits instead of ties at full saturation deciding the class.
inline double terminal_headroom(const Tensor& w, const Tensor& b, double lambda_prev)
{
	const std::size_t rows = b.numel(), cols = w.numel() / rows;
	double bound = 0.0;
	for (std::size_t i = 0; i < rows; ++i) {
		double s = std::max(b.data[i], 0.0);
		const double* row = w.ptr() + i * cols;
		for (std::size_t j = 0; j < cols; ++j) s += std::max(row[j], 0.0) * lambda_prev;
		bound = std::max(bound, s);
	}
	return bound > 0.0 ? bound : lambda_prev;
}

/// Apply data-normalization and build the spiking network: every weighted
/// layer is rescaled W*lambda_prev/lambda_cur, b/lambda_cur; relu/clip
/// layers vanish (absorbed by the spiking dynamics), avg-pool passes
/// through with its factor unchanged. With one factor per weighted layer
/// the list is used as given; with one fewer, the terminal factor is
/// derived from the layer's own weights via terminal_headroom. Training-time
/// input normalization is folded into the first layer so the network
/// consumes raw [0,1] intensities.
inline SpikingNetwork normalize(const ModelGraph& fused, const std::vector<double>& lambdas,
                                const Normalization& norm = {})
{
	if (fused.has_batchnorm())
		throw usage_error("convert: fuse batchnorm before normalization");
	const ConversionPlan plan = analyze_for_conversion(fused);
	const std::size_t nw = plan.weighted.size();
	if (lambdas.size() != nw - 1 && lambdas.size() != nw)
		throw usage_error("convert: got " + std::to_string(lambdas.size()) + " norm factors for " +
		                  std::to_string(nw) + " weighted layers, expected " + std::to_string(nw - 1) +
		                  " (final factor derived from the terminal weights) or " + std::to_string(nw));
	for (double l : lambdas)
		if (!(l > 0.0)) throw usage_error("convert: norm factors must be positive");

	SpikingNetwork net;
	net.input_shape = fused.input_shape;
	double lambda_prev = 1.0;
	std::size_t wi = 0;
	for (std::size_t i = 0; i < fused.nodes.size(); ++i) {
		const Layer& l = fused.nodes[i].layer;
		if (std::holds_alternative<ReLU>(l) || std::holds_alternative<Clip>(l)) continue;
		if (std::holds_alternative<AvgPool2d>(l)) {
			net.layers.emplace_back(std::get<AvgPool2d>(l));
			continue;
		}
		if (const auto* c = std::get_if<Conv2d>(&l)) {
			Conv2d sc(c->in_c, c->out_c, c->kh, c->stride, c->pad);
			sc.w = c->w;
			sc.b = c->b;
			if (wi == 0) fold_input_norm_conv(sc, norm);
			const double lambda_cur = wi < lambdas.size()
			                              ? lambdas[wi]
			                              : terminal_headroom(sc.w, sc.b, lambda_prev);
			const double wscale = lambda_prev / lambda_cur;
			for (double& v : sc.w.data) v *= wscale;
			for (double& v : sc.b.data) v /= lambda_cur;
			net.layers.emplace_back(std::move(sc));
			lambda_prev = lambda_cur;
		} else {
			const auto& d = std::get<Dense>(l);
			Dense sd(d.in_features, d.out_features);
			sd.w = d.w;
			sd.b = d.b;
			if (wi == 0) fold_input_norm_dense(sd, norm, fused.input_shape);
			const double lambda_cur = wi < lambdas.size()
			                              ? lambdas[wi]
			                              : terminal_headroom(sd.w, sd.b, lambda_prev);
			const double wscale = lambda_prev / lambda_cur;
			for (double& v : sd.w.data) v *= wscale;
			for (double& v : sd.b.data) v /= lambda_cur;
			net.layers.emplace_back(std::move(sd));
			lambda_prev = lambda_cur;
		}
		++wi;
	}
	return net;
}

/// Rewrite z = W(x-m)/s + b as z = W'x + b' with W' = W/s and
/// b' = b - sum(W m/s), channelwise. Exact except where padding meets a
/// non-zero mean (padded cells are zero pre-normalization here, but
/// (0-m)/s in the source model).
inline void fold_input_norm_conv(Conv2d& c, const Normalization& norm)
{
	const std::size_t per = c.kh * c.kw;
	auto at = [&](const std::vector<double>& v, std::size_t ch) {
		return v.size() == 1 ? v[0] : v.at(ch);
	};
	if (norm.mean.size() != 1 && norm.mean.size() != c.in_c)
		throw usage_error("convert: normalization mean needs 1 or " + std::to_string(c.in_c) + " entries");
	if (norm.stddev.size() != 1 && norm.stddev.size() != c.in_c)
		throw usage_error("convert: normalization std needs 1 or " + std::to_string(c.in_c) + " entries");
	for (std::size_t oc = 0; oc < c.out_c; ++oc) {
		double shift = 0.0;
		for (std::size_t ic = 0; ic < c.in_c; ++ic) {
			const double m = at(norm.mean, ic), s = at(norm.stddev, ic);
			if (!(s > 0.0)) throw usage_error("convert: normalization std must be positive");
			double* wp = c.w.ptr() + (oc * c.in_c + ic) * per;
			for (std::size_t j = 0; j < per; ++j) {
				shift += wp[j] * m / s;
				wp[j] /= s;
			}
		}
		c.b.data[oc] -= shift;
	}
}

inline void fold_input_norm_dense(Dense& d, const Normalization& norm, const Shape& input_shape)
{
	const std::size_t c = input_shape.empty() ? 1 : input_shape[0];
	const std::size_t spatial = d.in_features / c;
	auto at = [&](const std::vector<double>& v, std::size_t ch) {
		return v.size() == 1 ? v[0] : v.at(ch);
	};
	if (norm.mean.size() != 1 && norm.mean.size() != c)
		throw usage_error("convert: normalization mean needs 1 or " + std::to_string(c) + " entries");
	if (norm.stddev.size() != 1 && norm.stddev.size() != c)
		throw usage_error("convert: normalization std needs 1 or " + std::to_string(c) + " entries");
	for (std::size_t o = 0; o < d.out_features; ++o) {
		double shift = 0.0;
		double* wp = d.w.ptr() + o * d.in_features;
		for (std::size_t ic = 0; ic < c; ++ic) {
			const double m = at(norm.mean, ic), s = at(norm.stddev, ic);
			if (!(s > 0.0)) throw usage_error("convert: normalization std must be positive");
			for (std::size_t j = 0; j < spatial; ++j) {
				shift += wp[ic * spatial + j] * m / s;
				wp[ic * spatial + j] /= s;
			}
		}
		d.b.data[o] -= shift;
	}
}

/// Firing-rate model: with quantization step a_limit/T, an activation a in
/// [0, a_limit] maps to floor(a/step)/T; anything above a_limit saturates
/// at rate 1.
inline double estimate_rate(double a, double a_limit, std::size_t T)
{
	if (!(a_limit > 0.0)) throw usage_error("estimate_rate: a_limit must be positive");
	if (T == 0) throw usage_error("estimate_rate: T must be at least 1");
	if (a <= 0.0) return 0.0;
	if (a > a_limit) return 1.0;
	const double delta = a_limit / static_cast<double>(T);
	return std::floor(a / delta) / static_cast<double>(T);
}

struct ConversionErrorSummary {
	std::vector<double> mean_err;  // per tap, activation units
	std::vector<double> max_err;
	std::vector<double> clipped_fraction;  // share of activations above lambda
};

/// Expected conversion error per layer under the rate model: for each
/// post-relu activation a, the residual |a - lambda*estimate_rate(a)|.
/// Quantization contributes at most lambda/T; anything above lambda adds
/// clipping error on top.
inline ConversionErrorSummary predict_conversion_error(ModelGraph& g,
                                                       const std::vector<double>& lambdas,
                                                       const LabeledDataset& calib, std::size_t T,
                                                       const Normalization& norm = {},
                                                       std::size_t max_samples = 10000)
{
	const ConversionPlan plan = analyze_for_conversion(g);
	if (lambdas.size() != plan.taps())
		throw usage_error("predict: got " + std::to_string(lambdas.size()) + " norm factors for " +
		                  std::to_string(plan.taps()) + " taps");
	if (calib.size() == 0) throw data_error("predict: empty calibration dataset");
	ConversionErrorSummary sum;
	sum.mean_err.assign(plan.taps(), 0.0);
	sum.max_err.assign(plan.taps(), 0.0);
	sum.clipped_fraction.assign(plan.taps(), 0.0);
	std::vector<std::size_t> counts(plan.taps(), 0);
	const std::size_t use = std::min(max_samples, calib.size());
	const std::size_t batch = 256;
	for (std::size_t start = 0; start < use; start += batch) {
		const std::size_t n = std::min(batch, use - start);
		std::vector<std::size_t> idx(n);
		for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
		const Tensor x = calib.make_batch(idx, norm.mean, norm.stddev);
		const std::vector<Tensor> outs = g.forward_all(x, Mode::eval);
		for (std::size_t t = 0; t < plan.taps(); ++t) {
			for (double a : outs[plan.relu_after[t]].data) {
				const double err = std::abs(a - lambdas[t] * estimate_rate(a, lambdas[t], T));
				sum.mean_err[t] += err;
				sum.max_err[t] = std::max(sum.max_err[t], err);
				if (a > lambdas[t]) sum.clipped_fraction[t] += 1.0;
				++counts[t];
			}
		}
	}
	for (std::size_t t = 0; t < plan.taps(); ++t) {
		sum.mean_err[t] /= static_cast<double>(counts[t]);
		sum.clipped_fraction[t] /= static_cast<double>(counts[t]);
	}
	return sum;
}

}  // namespace csnn

#endif
