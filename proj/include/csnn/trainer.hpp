#ifndef CSNN_TRAINER_HPP
#define CSNN_TRAINER_HPP

#include <algorithm>
#include <numeric>
#include <random>
#include <utility>

#include "csnn/dataset.hpp"
#include "csnn/graph.hpp"
#include "csnn/loss.hpp"

namespace csnn {

/// Per-channel input normalization applied after pixel/255 scaling.
struct Normalization {
	std::vector<double> mean{0.0};
	std::vector<double> stddev{1.0};
};

struct OptimizerConfig {
	double eta = 0.01;
	double alpha = 5e-4;        // L2 coefficient for clip thresholds only
	double weight_decay = 0.0;  // L2 coefficient for ordinary parameters
	double momentum = 0.9;
	std::vector<std::pair<std::size_t, double>> schedule = {{15, 0.1}, {25, 0.1}};
	std::size_t epochs = 30;
	std::size_t batch_size = 64;
	std::uint64_t seed = 42;

	void validate() const
	{
		if (!(eta > 0.0)) throw usage_error("optimizer: eta must be positive");
		if (alpha < 0.0) throw usage_error("optimizer: alpha must be non-negative");
		if (weight_decay < 0.0) throw usage_error("optimizer: weight_decay must be non-negative");
		if (momentum < 0.0 || momentum >= 1.0) throw usage_error("optimizer: momentum must be in [0,1)");
		if (epochs == 0 || batch_size == 0)
			throw usage_error("optimizer: epochs and batch_size must be positive");
		for (std::size_t i = 1; i < schedule.size(); ++i)
			if (schedule[i].first <= schedule[i - 1].first)
				throw usage_error("optimizer: schedule epochs must be strictly increasing");
	}

	/// Learning rate in force during a given 0-based epoch.
	double lr_at(std::size_t epoch) const
	{
		double lr = eta;
		for (const auto& [e, mult] : schedule)
			if (epoch >= e) lr *= mult;
		return lr;
	}
};

/// One threshold step: lambda - eta*alpha*lambda - eta*grad, floored at 1e-3.
/// Plain gradient descent; thresholds carry no momentum.
inline double lambda_update(double lambda, double eta, double alpha, double grad)
{
	return std::max(lambda - eta * alpha * lambda - eta * grad, 1e-3);
}

struct EpochStats {
	double train_loss = 0.0;
	double test_loss = 0.0;
	double test_acc = 0.0;
	std::vector<double> lambdas;  // one per clip layer, graph order

	bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
	std::vector<EpochStats> epochs;

	bool operator==(const TrainReport&) const = default;
};

/// Momentum buffers for every tensor parameter, addressed by graph order.
struct SGDState {
	std::vector<Tensor> velocity;

	explicit SGDState(ModelGraph& g)
	{
		for_each_param(g, [&](Tensor& w, Tensor&) { velocity.emplace_back(w.shape); });
	}

	/// v = momentum*v + (grad + wd*w); w -= lr*v
	void step(ModelGraph& g, double lr, double momentum, double weight_decay)
	{
		std::size_t slot = 0;
		for_each_param(g, [&](Tensor& w, Tensor& grad) {
			Tensor& v = velocity[slot++];
			for (std::size_t i = 0; i < w.numel(); ++i) {
				const double gval = grad.data[i] + weight_decay * w.data[i];
				v.data[i] = momentum * v.data[i] + gval;
				w.data[i] -= lr * v.data[i];
			}
		});
	}
};

/// Mean cross-entropy and argmax accuracy over a dataset, eval mode.
inline std::pair<double, double> eval_loss_accuracy(ModelGraph& g, const LabeledDataset& d,
                                                    const Normalization& norm,
                                                    std::size_t eval_batch = 256)
{
	if (d.size() == 0) throw data_error("evaluate: empty dataset");
	double loss_sum = 0.0;
	std::size_t correct = 0;
	for (std::size_t start = 0; start < d.size(); start += eval_batch) {
		const std::size_t n = std::min(eval_batch, d.size() - start);
		std::vector<std::size_t> idx(n);
		std::iota(idx.begin(), idx.end(), start);
		const Tensor x = d.make_batch(idx, norm.mean, norm.stddev);
		const std::vector<std::size_t> labels = d.gather_labels(idx);
		const Tensor logits = g.forward(x, Mode::eval);
		const LossResult lr = softmax_cross_entropy(logits, labels);
		loss_sum += lr.loss * static_cast<double>(n);
		const std::size_t c = logits.shape[1];
		for (std::size_t i = 0; i < n; ++i)
			if (argmax(logits.ptr() + i * c, c) == labels[i]) ++correct;
	}
	return {loss_sum / static_cast<double>(d.size()),
	        static_cast<double>(correct) / static_cast<double>(d.size())};
}

inline double evaluate(ModelGraph& g, const LabeledDataset& d, const Normalization& norm = {})
{
	return eval_loss_accuracy(g, d, norm).second;
}

/// Momentum-SGD training with the dedicated threshold rule. Deterministic
/// for a fixed seed: shuffles come from one generator, update order is graph
/// order.
inline TrainReport train(ModelGraph& g, const DatasetPair& data, const OptimizerConfig& cfg,
                         const Normalization& norm = {})
{
	cfg.validate();
	g.validate();
	if (data.train.size() == 0 || data.test.size() == 0)
		throw data_error("train: empty dataset");
	data.train.validate();
	data.test.validate();

	SGDState sgd(g);
	std::mt19937_64 shuffle_rng(cfg.seed);
	std::vector<std::size_t> order(data.train.size());
	std::iota(order.begin(), order.end(), 0);

	TrainReport report;
	for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
		const double lr = cfg.lr_at(epoch);
		std::shuffle(order.begin(), order.end(), shuffle_rng);
		double loss_sum = 0.0;
		for (std::size_t start = 0, step = 0; start < order.size(); start += cfg.batch_size, ++step) {
			const std::size_t n = std::min(cfg.batch_size, order.size() - start);
			const std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + n);
			const Tensor x = data.train.make_batch(idx, norm.mean, norm.stddev);
			const std::vector<std::size_t> labels = data.train.gather_labels(idx);
			g.zero_grads();
			try {
				const Tensor logits = g.forward(x, Mode::train);
				const LossResult res = softmax_cross_entropy(logits, labels);
				if (!std::isfinite(res.loss))
					throw divergence_error("train: loss is not finite");
				loss_sum += res.loss * static_cast<double>(n);
				g.backward(res.dlogits);
			} catch (const divergence_error& e) {
				throw divergence_error(e.what(), epoch, step);
			}
			sgd.step(g, lr, cfg.momentum, cfg.weight_decay);
			for_each_clip(g, [&](ClipParam& p) {
				p.lambda = lambda_update(p.lambda, lr, cfg.alpha, p.grad);
			});
		}
		EpochStats st;
		st.train_loss = loss_sum / static_cast<double>(order.size());
		const auto [tl, ta] = eval_loss_accuracy(g, data.test, norm);
		st.test_loss = tl;
		st.test_acc = ta;
		for_each_clip(g, [&](ClipParam& p) { st.lambdas.push_back(p.lambda); });
		report.epochs.push_back(std::move(st));
	}
	return report;
}

}  // namespace csnn

#endif
