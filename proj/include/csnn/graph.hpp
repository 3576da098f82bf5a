#ifndef CSNN_GRAPH_HPP
#define CSNN_GRAPH_HPP

#include <optional>
#include <variant>
#include <vector>

#include "csnn/layers.hpp"

namespace csnn {

using Layer = std::variant<Conv2d, Dense, AvgPool2d, BatchNorm, ReLU, Clip>;

inline const char* layer_kind_name(const Layer& l)
{
	static const char* names[] = {"conv", "dense", "avg_pool", "batchnorm", "relu", "clip"};
	return names[l.index()];
}

/// One node of the feed-forward graph. input is the producing node's index,
/// or -1 for the graph input.
struct LayerNode {
	Layer layer;
	int input = -1;
};

/// A feed-forward network as a list of nodes in topological order. Every
/// node names its producer explicitly; validation requires exactly one
/// unconsumed (terminal) node, so well-formed graphs are chains.
struct ModelGraph {
	Shape input_shape;  // per sample
	std::vector<LayerNode> nodes;
	bool have_train_cache = false;  // set by a train-mode forward, consumed by backward
	Shape last_out_shape;           // batched terminal shape of the last train forward

	ModelGraph() = default;
	explicit ModelGraph(Shape in) : input_shape(std::move(in)) {}

	/// Append a node consuming the previous one (or the graph input if first).
	int add(Layer l)
	{
		return add(std::move(l), static_cast<int>(nodes.size()) - 1);
	}

	int add(Layer l, int input)
	{
		nodes.push_back(LayerNode{std::move(l), input});
		return static_cast<int>(nodes.size()) - 1;
	}

	void validate() const
	{
		if (shape_numel(input_shape) == 0)
			throw usage_error("graph: empty input shape");
		if (nodes.empty()) throw usage_error("graph: no layers");
		std::vector<bool> consumed(nodes.size(), false);
		for (std::size_t i = 0; i < nodes.size(); ++i) {
			const int in = nodes[i].input;
			if (in < -1 || in >= static_cast<int>(i))
				throw usage_error("graph: node " + std::to_string(i) + " references input " +
				                  std::to_string(in) + ", must name an earlier node or -1");
			if (in >= 0) consumed[in] = true;
		}
		std::size_t terminals = 0;
		for (std::size_t i = 0; i < nodes.size(); ++i)
			if (!consumed[i]) ++terminals;
		if (terminals != 1)
			throw usage_error("graph: expected exactly one terminal node, found " +
			                  std::to_string(terminals));
		node_shapes();  // raises on any per-layer geometry mismatch
	}

	std::size_t terminal() const
	{
		std::vector<bool> consumed(nodes.size(), false);
		for (const LayerNode& n : nodes)
			if (n.input >= 0) consumed[n.input] = true;
		for (std::size_t i = nodes.size(); i-- > 0;)
			if (!consumed[i]) return i;
		throw usage_error("graph: no terminal node");
	}

	/// Per-sample output shape of every node.
	std::vector<Shape> node_shapes() const
	{
		std::vector<Shape> shapes(nodes.size());
		for (std::size_t i = 0; i < nodes.size(); ++i) {
			const Shape& in = nodes[i].input < 0 ? input_shape : shapes[nodes[i].input];
			try {
				shapes[i] = std::visit([&](const auto& l) { return l.out_shape(in); }, nodes[i].layer);
			} catch (const error& e) {
				throw usage_error("graph: node " + std::to_string(i) + " (" +
				                  layer_kind_name(nodes[i].layer) + "): " + e.what());
			}
		}
		return shapes;
	}

	/// Run the whole graph on a batch and return every node's output. The
	/// first axis of x is the batch. Non-finite activations are reported with
	/// the offending node index.
	std::vector<Tensor> forward_all(const Tensor& x, Mode mode)
	{
		if (x.rank() != input_shape.size() + 1 ||
		    !std::equal(input_shape.begin(), input_shape.end(), x.shape.begin() + 1))
			throw usage_error("graph: input batch " + shape_str(x.shape) + " does not match input shape " +
			                  shape_str(input_shape));
		std::vector<Tensor> outs;
		outs.reserve(nodes.size());
		for (std::size_t i = 0; i < nodes.size(); ++i) {
			const Tensor& in = nodes[i].input < 0 ? x : outs[nodes[i].input];
			Tensor out = std::visit([&](auto& l) { return l.forward(in, mode); }, nodes[i].layer);
			if (!out.all_finite())
				throw divergence_error("graph: node " + std::to_string(i) + " (" +
				                       layer_kind_name(nodes[i].layer) + ") produced non-finite values");
			outs.push_back(std::move(out));
		}
		have_train_cache = (mode == Mode::train);
		if (have_train_cache) last_out_shape = outs[terminal()].shape;
		return outs;
	}

	Tensor forward(const Tensor& x, Mode mode)
	{
		std::vector<Tensor> outs = forward_all(x, mode);
		return std::move(outs[terminal()]);
	}

	/// Backpropagate from the terminal node. Parameter gradients accumulate
	/// into each layer's grad buffers (zero them first via zero_grads).
	/// Returns the gradient with respect to the graph input.
	Tensor backward(const Tensor& dout)
	{
		if (!have_train_cache)
			throw usage_error("graph: backward requires a preceding train-mode forward");
		if (dout.shape != last_out_shape)
			throw usage_error("graph: output gradient " + shape_str(dout.shape) +
			                  " does not match last forward output " + shape_str(last_out_shape));
		const std::size_t term = terminal();
		std::vector<std::optional<Tensor>> grads(nodes.size());
		grads[term] = dout;
		std::optional<Tensor> dinput;
		auto accumulate = [](std::optional<Tensor>& slot, Tensor&& g) {
			if (!slot) {
				slot = std::move(g);
				return;
			}
			if (!slot->same_shape(g))
				throw usage_error("graph: fan-out gradient shape mismatch, " + shape_str(slot->shape) +
				                  " vs " + shape_str(g.shape));
			for (std::size_t i = 0; i < g.numel(); ++i) slot->data[i] += g.data[i];
		};
		for (std::size_t i = nodes.size(); i-- > 0;) {
			if (!grads[i]) continue;  // dangling branch of an unvalidated graph
			Tensor dx = std::visit([&](auto& l) { return l.backward(*grads[i]); }, nodes[i].layer);
			grads[i].reset();
			if (nodes[i].input < 0)
				accumulate(dinput, std::move(dx));
			else
				accumulate(grads[nodes[i].input], std::move(dx));
		}
		if (!dinput) throw usage_error("graph: backward produced no input gradient");
		return std::move(*dinput);
	}

	void zero_grads()
	{
		for (LayerNode& n : nodes) {
			if (auto* d = std::get_if<Dense>(&n.layer)) {
				d->gw.fill(0.0);
				d->gb.fill(0.0);
			} else if (auto* c = std::get_if<Conv2d>(&n.layer)) {
				c->gw.fill(0.0);
				c->gb.fill(0.0);
			} else if (auto* b = std::get_if<BatchNorm>(&n.layer)) {
				b->ggamma.fill(0.0);
				b->gbeta.fill(0.0);
			} else if (auto* cl = std::get_if<Clip>(&n.layer)) {
				cl->param.grad = 0.0;
			}
		}
	}

	/// Indices of clip nodes in graph order.
	std::vector<std::size_t> clip_nodes() const
	{
		std::vector<std::size_t> out;
		for (std::size_t i = 0; i < nodes.size(); ++i)
			if (std::holds_alternative<Clip>(nodes[i].layer)) out.push_back(i);
		return out;
	}

	bool has_batchnorm() const
	{
		for (const LayerNode& n : nodes)
			if (std::holds_alternative<BatchNorm>(n.layer)) return true;
		return false;
	}
};

/// Visit every trainable tensor parameter as (weights, gradient) pairs.
/// Clip thresholds are scalar and handled separately via for_each_clip.
template <class F>
void for_each_param(ModelGraph& g, F&& f)
{
	for (LayerNode& n : g.nodes) {
		if (auto* d = std::get_if<Dense>(&n.layer)) {
			f(d->w, d->gw);
			f(d->b, d->gb);
		} else if (auto* c = std::get_if<Conv2d>(&n.layer)) {
			f(c->w, c->gw);
			f(c->b, c->gb);
		} else if (auto* b = std::get_if<BatchNorm>(&n.layer)) {
			f(b->p.gamma, b->ggamma);
			f(b->p.beta, b->gbeta);
		}
	}
}

template <class F>
void for_each_clip(ModelGraph& g, F&& f)
{
	for (LayerNode& n : g.nodes)
		if (auto* c = std::get_if<Clip>(&n.layer)) f(c->param);
}

}  // namespace csnn

#endif
