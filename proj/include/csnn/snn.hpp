#ifndef CSNN_SNN_HPP
#define CSNN_SNN_HPP

#include <variant>

#include "csnn/dataset.hpp"
#include "csnn/layers.hpp"

namespace csnn {

/// One integrate-and-fire step with reset-by-subtraction:
/// spike iff V + z >= V_thr, and the potential keeps the overshoot.
inline std::pair<int, double> if_step(double v, double z, double v_thr)
{
	const double u = v + z;
	const int spike = u >= v_thr ? 1 : 0;
	return {spike, u - v_thr * static_cast<double>(spike)};
}

struct SimConfig {
	std::size_t T = 100;
	bool record_rates = false;

	void validate() const
	{
		if (T == 0) throw usage_error("simulate: T must be at least 1");
	}
};

/// Per-layer per-neuron spike counts over a run of T steps.
struct RateRecord {
	std::size_t T = 0;
	std::vector<Tensor> counts;  // one tensor per spiking layer, plus the output layer

	double rate(std::size_t layer, std::size_t neuron) const
	{
		return counts[layer].data[neuron] / static_cast<double>(T);
	}
};

/// A converted layer: conv/dense drive integrate-and-fire units, avg-pool
/// passes window means through without thresholding. wt holds the weights
/// transposed to [fan_in, fan_out] so the time-step product can skip silent
/// (zero) inputs.
struct SpikingLayer {
	std::variant<Conv2d, Dense, AvgPool2d> op;
	Tensor wt;
	std::vector<double> col_scratch, out_scratch;

	explicit SpikingLayer(Conv2d c) : op(std::move(c)) { build_wt(); }
	explicit SpikingLayer(Dense d) : op(std::move(d)) { build_wt(); }
	explicit SpikingLayer(AvgPool2d p) : op(std::move(p)) {}

	void build_wt()
	{
		if (const auto* c = std::get_if<Conv2d>(&op)) {
			const std::size_t k = c->col_rows(), oc = c->out_c;
			wt = Tensor(Shape{k, oc});
			for (std::size_t o = 0; o < oc; ++o)
				for (std::size_t j = 0; j < k; ++j) wt.data[j * oc + o] = c->w.data[o * k + j];
		} else if (const auto* d = std::get_if<Dense>(&op)) {
			wt = Tensor(Shape{d->in_features, d->out_features});
			for (std::size_t o = 0; o < d->out_features; ++o)
				for (std::size_t j = 0; j < d->in_features; ++j)
					wt.data[j * d->out_features + o] = d->w.data[o * d->in_features + j];
		}
	}

	bool integrate_fire() const { return !std::holds_alternative<AvgPool2d>(op); }

	Shape out_shape(const Shape& in) const
	{
		return std::visit([&](const auto& l) { return l.out_shape(in); }, op);
	}

	/// Input currents z for one time step: weighted sum of the incoming
	/// spikes (or currents) plus bias. Skips zero entries of the input, which
	/// carries the cost down with the spike rate.
	Tensor currents(const Tensor& x)
	{
		if (const auto* pool = std::get_if<AvgPool2d>(&op)) {
			AvgPool2d p = *pool;
			return p.forward(x, Mode::eval);
		}
		if (const auto* d = std::get_if<Dense>(&op)) {
			const std::size_t n = x.shape[0];
			if (x.numel() != n * d->in_features)
				throw usage_error("snn: dense layer expects " + std::to_string(d->in_features) +
				                  " inputs, got batch " + shape_str(x.shape));
			Tensor z(Shape{n, d->out_features});
			for (std::size_t i = 0; i < n; ++i) {
				double* row = z.ptr() + i * d->out_features;
				for (std::size_t j = 0; j < d->out_features; ++j) row[j] = d->b.data[j];
			}
			gemm_nn(x.ptr(), wt.ptr(), z.ptr(), n, d->in_features, d->out_features, true);
			return z;
		}
		const auto& c = std::get<Conv2d>(op);
		const std::size_t n = x.shape[0];
		const Shape os = c.out_shape({x.shape[1], x.shape[2], x.shape[3]});
		const std::size_t oh = os[1], ow = os[2], p = oh * ow, k = c.col_rows();
		Tensor z(Shape{n, c.out_c, oh, ow});
		col_scratch.resize(k * p);
		out_scratch.resize(p * c.out_c);
		for (std::size_t i = 0; i < n; ++i) {
			c.im2col(x.ptr() + i * c.in_c * x.shape[2] * x.shape[3], x.shape[2], x.shape[3], oh, ow,
			         col_scratch.data());
			std::fill(out_scratch.begin(), out_scratch.end(), 0.0);
			// [P,oc] += cols^T [P,K] * wt [K,oc]; the column matrix is the
			// sparse operand, so it drives the skip
			gemm_tn(col_scratch.data(), wt.ptr(), out_scratch.data(), p, k, c.out_c, true);
			double* dst = z.ptr() + i * c.out_c * p;
			for (std::size_t oc = 0; oc < c.out_c; ++oc) {
				const double bias = c.b.data[oc];
				for (std::size_t j = 0; j < p; ++j) dst[oc * p + j] = out_scratch[j * c.out_c + oc] + bias;
			}
		}
		return z;
	}
};

/// BN-free, clip-free network with normalized weights; V_thr is shared by
/// every integrate-and-fire layer.
struct SpikingNetwork {
	Shape input_shape;
	std::vector<SpikingLayer> layers;
	double v_thr = 1.0;

	std::vector<Shape> layer_shapes() const
	{
		std::vector<Shape> out;
		Shape cur = input_shape;
		for (const SpikingLayer& l : layers) {
			cur = l.out_shape(cur);
			out.push_back(cur);
		}
		return out;
	}

	std::size_t classes() const
	{
		if (layers.empty()) throw usage_error("snn: empty network");
		return shape_numel(layer_shapes().back());
	}
};

struct NeuronState {
	Tensor v;  // membrane potential per neuron, batched
};

/// Advance one layer by one step: compute currents from the incoming
/// spikes/currents, integrate, fire, subtract. Pool layers are stateless and
/// return fractional window means.
inline Tensor layer_step(SpikingLayer& layer, const Tensor& input, NeuronState& state, double v_thr)
{
	Tensor z = layer.currents(input);
	if (!layer.integrate_fire()) return z;
	if (state.v.numel() == 0) state.v = Tensor(z.shape);
	if (!state.v.same_shape(z))
		throw usage_error("snn: neuron state " + shape_str(state.v.shape) + " does not match currents " +
		                  shape_str(z.shape));
	for (std::size_t i = 0; i < z.numel(); ++i) {
		const double u = state.v.data[i] + z.data[i];
		const double spike = u >= v_thr ? 1.0 : 0.0;
		state.v.data[i] = u - v_thr * spike;
		z.data[i] = spike;
	}
	return z;  // now holds the spikes
}

/// Run T synchronous steps on a batch; the first layer sees the raw input as
/// constant currents every step. Returns per-layer spike counts (integers
/// stored as doubles), including the output layer as the last entry.
inline std::vector<Tensor> simulate_batch(SpikingNetwork& net, const Tensor& x, std::size_t T)
{
	if (T == 0) throw usage_error("simulate: T must be at least 1");
	if (x.rank() != net.input_shape.size() + 1 ||
	    !std::equal(net.input_shape.begin(), net.input_shape.end(), x.shape.begin() + 1))
		throw usage_error("simulate: input batch " + shape_str(x.shape) + " does not match network input " +
		                  shape_str(net.input_shape));
	std::vector<NeuronState> states(net.layers.size());
	std::vector<Tensor> counts(net.layers.size());
	for (std::size_t t = 0; t < T; ++t) {
		const Tensor* cur = &x;
		Tensor propagated;
		for (std::size_t li = 0; li < net.layers.size(); ++li) {
			propagated = layer_step(net.layers[li], *cur, states[li], net.v_thr);
			if (net.layers[li].integrate_fire()) {
				if (counts[li].numel() == 0) counts[li] = Tensor(propagated.shape);
				for (std::size_t i = 0; i < propagated.numel(); ++i) counts[li].data[i] += propagated.data[i];
			}
			cur = &propagated;
		}
	}
	// pool layers produced no counts; drop their empty slots
	std::vector<Tensor> out;
	for (std::size_t li = 0; li < net.layers.size(); ++li)
		if (net.layers[li].integrate_fire()) out.push_back(std::move(counts[li]));
	return out;
}

/// Single-sample classification: spike-count argmax over the output layer,
/// ties resolved toward the lower class index.
inline std::pair<std::size_t, RateRecord> simulate(SpikingNetwork& net, const Tensor& sample,
                                                   const SimConfig& cfg)
{
	cfg.validate();
	if (sample.shape != net.input_shape)
		throw usage_error("simulate: sample " + shape_str(sample.shape) + " does not match network input " +
		                  shape_str(net.input_shape));
	Shape bs = sample.shape;
	bs.insert(bs.begin(), 1);
	Tensor x(bs, sample.data);
	std::vector<Tensor> counts = simulate_batch(net, x, cfg.T);
	const Tensor& out = counts.back();
	const std::size_t cls = argmax(out.ptr(), out.numel());
	RateRecord rec;
	rec.T = cfg.T;
	if (cfg.record_rates) rec.counts = std::move(counts);
	return {cls, std::move(rec)};
}

struct SnnEvalResult {
	double accuracy = 0.0;
	std::vector<double> mean_rates;  // one per integrate-and-fire layer
	Tensor output_counts;            // [samples, classes] spike counts
};

/// Accuracy and mean spike rates over a dataset. Samples are fed as [0,1]
/// pixel intensities; any training-time input normalization is already
/// folded into the first layer by the converter.
inline SnnEvalResult evaluate_snn(SpikingNetwork& net, const LabeledDataset& data,
                                  const SimConfig& cfg, std::size_t batch = 64)
{
	cfg.validate();
	if (data.size() == 0) throw data_error("evaluate: empty dataset");
	const std::vector<double> zero{0.0}, one{1.0};
	SnnEvalResult res;
	std::vector<double> rate_sums;
	std::vector<std::size_t> rate_sizes;
	res.output_counts = Tensor(Shape{data.size(), net.classes()});
	std::size_t correct = 0;
	for (std::size_t start = 0; start < data.size(); start += batch) {
		const std::size_t n = std::min(batch, data.size() - start);
		std::vector<std::size_t> idx(n);
		for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
		const Tensor x = data.make_batch(idx, zero, one);
		std::vector<Tensor> counts = simulate_batch(net, x, cfg.T);
		if (rate_sums.empty()) {
			rate_sums.assign(counts.size(), 0.0);
			rate_sizes.assign(counts.size(), 0);
		}
		for (std::size_t li = 0; li < counts.size(); ++li) {
			rate_sums[li] += counts[li].sum();
			rate_sizes[li] += counts[li].numel();
		}
		const Tensor& out = counts.back();
		const std::size_t classes = out.shape[1];
		for (std::size_t i = 0; i < n; ++i) {
			const std::size_t pred = argmax(out.ptr() + i * classes, classes);
			if (pred == data.labels[start + i]) ++correct;
			for (std::size_t cidx = 0; cidx < classes; ++cidx)
				res.output_counts.data[(start + i) * classes + cidx] = out.data[i * classes + cidx];
		}
	}
	res.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
	for (std::size_t li = 0; li < rate_sums.size(); ++li)
		res.mean_rates.push_back(rate_sums[li] / (static_cast<double>(rate_sizes[li]) *
		                                          static_cast<double>(cfg.T)));
	return res;
}

}  // namespace csnn

#endif
