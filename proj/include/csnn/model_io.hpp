#ifndef CSNN_MODEL_IO_HPP
#define CSNN_MODEL_IO_HPP

#include <bit>
#include <cstdint>
#include <fstream>

#include "csnn/graph.hpp"
#include "csnn/snn.hpp"

namespace csnn {

struct ModelFileMeta {
	std::uint64_t seed = 42;
	std::uint64_t config_hash = 0;
	bool snn = false;
	double v_thr = 1.0;
};

namespace io {

inline void write_u32(std::ostream& o, std::uint32_t v)
{
	unsigned char b[4];
	for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
	o.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& o, std::uint64_t v)
{
	unsigned char b[8];
	for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
	o.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& o, double v) { write_u64(o, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t read_u32(std::istream& in, const std::string& path)
{
	unsigned char b[4];
	if (!in.read(reinterpret_cast<char*>(b), 4)) throw data_error(path + ": truncated model file");
	std::uint32_t v = 0;
	for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
	return v;
}

inline std::uint64_t read_u64(std::istream& in, const std::string& path)
{
	unsigned char b[8];
	if (!in.read(reinterpret_cast<char*>(b), 8)) throw data_error(path + ": truncated model file");
	std::uint64_t v = 0;
	for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
	return v;
}

inline double read_f64(std::istream& in, const std::string& path)
{
	return std::bit_cast<double>(read_u64(in, path));
}

inline void write_blob(std::ostream& o, const Tensor& t)
{
	write_u64(o, t.numel());
	for (double v : t.data) write_f64(o, v);
}

inline Tensor read_blob(std::istream& in, const std::string& path, const Shape& shape)
{
	const std::uint64_t len = read_u64(in, path);
	if (len != shape_numel(shape))
		throw data_error(path + ": parameter blob holds " + std::to_string(len) + " values, shape " +
		                 shape_str(shape) + " needs " + std::to_string(shape_numel(shape)));
	Tensor t(shape);
	for (double& v : t.data) v = read_f64(in, path);
	return t;
}

inline void write_shape(std::ostream& o, const Shape& s)
{
	write_u32(o, static_cast<std::uint32_t>(s.size()));
	for (std::size_t d : s) write_u64(o, d);
}

inline Shape read_shape(std::istream& in, const std::string& path)
{
	const std::uint32_t rank = read_u32(in, path);
	if (rank > 8) throw data_error(path + ": implausible shape rank " + std::to_string(rank));
	Shape s(rank);
	for (auto& d : s) d = read_u64(in, path);
	return s;
}

enum : std::uint8_t { k_conv = 0, k_dense = 1, k_pool = 2, k_bn = 3, k_relu = 4, k_clip = 5 };

}  // namespace io

inline constexpr std::uint32_t model_format_version = 1;

/// Serialize a graph with provenance. Layout: "CSNN" magic, version, flags
/// (bit 0 marks a converted spiking model), seed, config hash, threshold,
/// input shape, then per node: kind byte, input index, geometry, parameter
/// blobs as little-endian 64-bit reals.
inline void save_model(const ModelGraph& g, const ModelFileMeta& meta, const std::string& path)
{
	std::ofstream o(path, std::ios::binary);
	if (!o) throw data_error(path + ": cannot write");
	o.write("CSNN", 4);
	io::write_u32(o, model_format_version);
	io::write_u32(o, meta.snn ? 1u : 0u);
	io::write_u64(o, meta.seed);
	io::write_u64(o, meta.config_hash);
	io::write_f64(o, meta.v_thr);
	io::write_shape(o, g.input_shape);
	io::write_u32(o, static_cast<std::uint32_t>(g.nodes.size()));
	for (const LayerNode& n : g.nodes) {
		std::uint8_t kind = 0;
		std::visit(
		    [&](const auto& l) {
			    using L = std::decay_t<decltype(l)>;
			    if constexpr (std::is_same_v<L, Conv2d>) kind = io::k_conv;
			    else if constexpr (std::is_same_v<L, Dense>) kind = io::k_dense;
			    else if constexpr (std::is_same_v<L, AvgPool2d>) kind = io::k_pool;
			    else if constexpr (std::is_same_v<L, BatchNorm>) kind = io::k_bn;
			    else if constexpr (std::is_same_v<L, ReLU>) kind = io::k_relu;
			    else kind = io::k_clip;
		    },
		    n.layer);
		o.put(static_cast<char>(kind));
		io::write_u32(o, static_cast<std::uint32_t>(n.input));
		if (const auto* c = std::get_if<Conv2d>(&n.layer)) {
			io::write_u64(o, c->in_c);
			io::write_u64(o, c->out_c);
			io::write_u64(o, c->kh);
			io::write_u64(o, c->stride);
			io::write_u64(o, c->pad);
			io::write_blob(o, c->w);
			io::write_blob(o, c->b);
		} else if (const auto* d = std::get_if<Dense>(&n.layer)) {
			io::write_u64(o, d->in_features);
			io::write_u64(o, d->out_features);
			io::write_blob(o, d->w);
			io::write_blob(o, d->b);
		} else if (const auto* p = std::get_if<AvgPool2d>(&n.layer)) {
			io::write_u64(o, p->k);
		} else if (const auto* b = std::get_if<BatchNorm>(&n.layer)) {
			io::write_u64(o, b->p.channels());
			io::write_f64(o, b->p.epsilon);
			io::write_f64(o, b->momentum);
			io::write_blob(o, b->p.gamma);
			io::write_blob(o, b->p.beta);
			io::write_blob(o, b->p.running_mu);
			io::write_blob(o, b->p.running_sigma);
		} else if (const auto* cl = std::get_if<Clip>(&n.layer)) {
			io::write_f64(o, cl->param.lambda);
		}
	}
	if (!o) throw data_error(path + ": write failed");
}

struct LoadedModel {
	ModelGraph graph;
	ModelFileMeta meta;
};

inline LoadedModel load_model(const std::string& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) throw data_error(path + ": cannot open");
	char magic[4];
	if (!in.read(magic, 4) || std::string(magic, 4) != "CSNN")
		throw data_error(path + ": bad magic at byte 0, not a model file");
	const std::uint32_t version = io::read_u32(in, path);
	if (version != model_format_version)
		throw data_error(path + ": unsupported format version " + std::to_string(version));
	LoadedModel out;
	const std::uint32_t flags = io::read_u32(in, path);
	out.meta.snn = (flags & 1u) != 0;
	out.meta.seed = io::read_u64(in, path);
	out.meta.config_hash = io::read_u64(in, path);
	out.meta.v_thr = io::read_f64(in, path);
	out.graph.input_shape = io::read_shape(in, path);
	const std::uint32_t count = io::read_u32(in, path);
	for (std::uint32_t i = 0; i < count; ++i) {
		int kind = in.get();
		if (kind == EOF) throw data_error(path + ": truncated at node " + std::to_string(i));
		const std::int32_t input = static_cast<std::int32_t>(io::read_u32(in, path));
		Layer layer;
		switch (kind) {
			case io::k_conv: {
				const std::size_t ic = io::read_u64(in, path), oc = io::read_u64(in, path);
				const std::size_t k = io::read_u64(in, path), s = io::read_u64(in, path),
				                  p = io::read_u64(in, path);
				Conv2d c(ic, oc, k, s, p);
				c.w = io::read_blob(in, path, {oc, ic, k, k});
				c.b = io::read_blob(in, path, {oc});
				layer = std::move(c);
				break;
			}
			case io::k_dense: {
				const std::size_t fi = io::read_u64(in, path), fo = io::read_u64(in, path);
				Dense d(fi, fo);
				d.w = io::read_blob(in, path, {fo, fi});
				d.b = io::read_blob(in, path, {fo});
				layer = std::move(d);
				break;
			}
			case io::k_pool:
				layer = AvgPool2d(io::read_u64(in, path));
				break;
			case io::k_bn: {
				const std::size_t ch = io::read_u64(in, path);
				BatchNorm b(ch, io::read_f64(in, path));
				b.momentum = io::read_f64(in, path);
				b.p.gamma = io::read_blob(in, path, {ch});
				b.p.beta = io::read_blob(in, path, {ch});
				b.p.running_mu = io::read_blob(in, path, {ch});
				b.p.running_sigma = io::read_blob(in, path, {ch});
				layer = std::move(b);
				break;
			}
			case io::k_relu:
				layer = ReLU{};
				break;
			case io::k_clip: {
				Clip c;
				c.param.lambda = io::read_f64(in, path);
				layer = std::move(c);
				break;
			}
			default:
				throw data_error(path + ": unknown layer kind " + std::to_string(kind) + " at node " +
				                 std::to_string(i));
		}
		out.graph.add(std::move(layer), input);
	}
	out.graph.validate();
	return out;
}

/// View a pure conv/dense/pool chain as a spiking network.
inline SpikingNetwork to_spiking(const ModelGraph& chain, double v_thr)
{
	SpikingNetwork net;
	net.input_shape = chain.input_shape;
	net.v_thr = v_thr;
	for (const LayerNode& n : chain.nodes) {
		if (const auto* c = std::get_if<Conv2d>(&n.layer))
			net.layers.emplace_back(*c);
		else if (const auto* d = std::get_if<Dense>(&n.layer))
			net.layers.emplace_back(*d);
		else if (const auto* p = std::get_if<AvgPool2d>(&n.layer))
			net.layers.emplace_back(*p);
		else
			throw data_error("spiking model contains a " + std::string(layer_kind_name(n.layer)) +
			                 " layer; only conv, dense and avg-pool are valid after conversion");
	}
	return net;
}

inline ModelGraph from_spiking(const SpikingNetwork& net)
{
	ModelGraph g(net.input_shape);
	for (const SpikingLayer& l : net.layers) {
		if (const auto* c = std::get_if<Conv2d>(&l.op))
			g.add(*c);
		else if (const auto* d = std::get_if<Dense>(&l.op))
			g.add(*d);
		else
			g.add(std::get<AvgPool2d>(l.op));
	}
	return g;
}

inline void save_snn(const SpikingNetwork& net, ModelFileMeta meta, const std::string& path)
{
	meta.snn = true;
	meta.v_thr = net.v_thr;
	save_model(from_spiking(net), meta, path);
}

inline SpikingNetwork load_snn(const std::string& path, ModelFileMeta* meta_out = nullptr)
{
	LoadedModel m = load_model(path);
	if (!m.meta.snn) throw data_error(path + ": model file is not a converted spiking network");
	if (meta_out) *meta_out = m.meta;
	return to_spiking(m.graph, m.meta.v_thr);
}

}  // namespace csnn

#endif
