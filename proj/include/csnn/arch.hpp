#ifndef CSNN_ARCH_HPP
#define CSNN_ARCH_HPP

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csnn/graph.hpp"

namespace csnn {

/// He-normal initialization for all conv/dense weights, zero biases. Draw
/// order follows graph order, so a seed pins every parameter.
inline void init_params(ModelGraph& g, std::uint64_t seed)
{
	std::mt19937_64 rng(seed);
	for (LayerNode& n : g.nodes) {
		if (auto* c = std::get_if<Conv2d>(&n.layer)) {
			const double fan_in = static_cast<double>(c->in_c * c->kh * c->kw);
			std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / fan_in));
			for (double& v : c->w.data) v = nd(rng);
			c->b.fill(0.0);
		} else if (auto* d = std::get_if<Dense>(&n.layer)) {
			std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / static_cast<double>(d->in_features)));
			for (double& v : d->w.data) v = nd(rng);
			d->b.fill(0.0);
		}
	}
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep)
{
	std::vector<std::string> out;
	std::string cur;
	for (char ch : s) {
		if (ch == sep) {
			out.push_back(cur);
			cur.clear();
		} else {
			cur += ch;
		}
	}
	out.push_back(cur);
	return out;
}

inline std::size_t parse_count(const std::string& tok, std::size_t idx, const std::string& field,
                               const std::string& text)
{
	std::size_t pos = 0;
	unsigned long v = 0;
	try {
		v = std::stoul(text, &pos);
	} catch (const std::exception&) {
		pos = std::string::npos;
	}
	if (pos != text.size() || text.empty())
		throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok + "'): field '" + field +
		                  "': expected a positive integer, got '" + text + "'");
	if (v == 0)
		throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok + "'): field '" + field +
		                  "' must be positive");
	return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Build a graph from a compact layer list, e.g.
///   "conv:8:3:p1 bn relu clip pool:2 dense:10"
/// Tokens: conv:OUT:K[:sS][:pP]   bn   relu   clip   pool:K   dense:OUT
/// Channel counts and feature extents are inferred by walking the shapes.
inline ModelGraph build_custom(const Shape& input_shape, const std::string& spec)
{
	ModelGraph g(input_shape);
	Shape cur = input_shape;
	std::istringstream in(spec);
	std::string tok;
	std::size_t idx = 0;
	while (in >> tok) {
		const std::vector<std::string> f = detail::split(tok, ':');
		const std::string& kind = f[0];
		Layer layer;
		if (kind == "conv") {
			if (f.size() < 3)
				throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok +
				                  "'): conv needs fields 'out' and 'kernel'");
			if (cur.size() != 3)
				throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok +
				                  "'): conv on non-image input " + shape_str(cur));
			const std::size_t oc = detail::parse_count(tok, idx, "out", f[1]);
			const std::size_t k = detail::parse_count(tok, idx, "kernel", f[2]);
			std::size_t stride = 1, pad = 0;
			for (std::size_t i = 3; i < f.size(); ++i) {
				if (f[i].size() > 1 && f[i][0] == 's')
					stride = detail::parse_count(tok, idx, "stride", f[i].substr(1));
				else if (f[i].size() > 1 && f[i][0] == 'p')
					pad = detail::parse_count(tok, idx, "pad", f[i].substr(1));
				else
					throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok + "'): field '" +
					                  f[i] + "': expected sN or pN");
			}
			layer = Conv2d(cur[0], oc, k, stride, pad);
		} else if (kind == "dense") {
			if (f.size() != 2)
				throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok +
				                  "'): dense needs exactly one field 'out'");
			layer = Dense(shape_numel(cur), detail::parse_count(tok, idx, "out", f[1]));
		} else if (kind == "pool") {
			if (f.size() != 2)
				throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok +
				                  "'): pool needs exactly one field 'window'");
			layer = AvgPool2d(detail::parse_count(tok, idx, "window", f[1]));
		} else if (kind == "bn") {
			if (cur.empty())
				throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok + "'): bn on empty shape");
			layer = BatchNorm(cur[0]);
		} else if (kind == "relu") {
			layer = ReLU{};
		} else if (kind == "clip") {
			layer = Clip{};
		} else {
			throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok + "'): unknown layer kind '" +
			                  kind + "'");
		}
		try {
			cur = std::visit([&](const auto& l) { return l.out_shape(cur); }, layer);
		} catch (const error& e) {
			throw usage_error("arch: token " + std::to_string(idx) + " ('" + tok + "'): " + e.what());
		}
		g.add(std::move(layer));
		++idx;
	}
	g.validate();
	return g;
}

/// The small 4-conv/2-dense classifier used throughout: BN after each conv,
/// ReLU followed by a trainable clip after every hidden layer, two rounds of
/// 2x2 average pooling.
inline ModelGraph build_cnet(const Shape& input_shape, std::size_t classes)
{
	if (input_shape.size() != 3)
		throw usage_error("arch: cnet expects (C,H,W) input, got " + shape_str(input_shape));
	std::ostringstream s;
	s << "conv:8:3:p1 bn relu clip pool:2 "
	  << "conv:16:3:p1 bn relu clip pool:2 "
	  << "conv:16:3:p1 bn relu clip "
	  << "conv:16:3:p1 bn relu clip "
	  << "dense:96 relu clip dense:" << classes;
	return build_custom(input_shape, s.str());
}

/// Two dense layers with one hidden clip: in-hidden-classes.
inline ModelGraph build_mlp(const Shape& input_shape, std::size_t hidden, std::size_t classes)
{
	std::ostringstream s;
	s << "dense:" << hidden << " relu clip dense:" << classes;
	return build_custom(input_shape, s.str());
}

/// name is "cnet", "mlp", or a custom layer list for build_custom.
inline ModelGraph build_architecture(const std::string& name, const Shape& input_shape,
                                     std::size_t classes, std::uint64_t seed)
{
	ModelGraph g;
	if (name == "cnet")
		g = build_cnet(input_shape, classes);
	else if (name == "mlp")
		g = build_mlp(input_shape, 100, classes);
	else
		g = build_custom(input_shape, name);
	init_params(g, seed);
	return g;
}

}  // namespace csnn

#endif
