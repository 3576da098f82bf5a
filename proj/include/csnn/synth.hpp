#ifndef CSNN_SYNTH_HPP
#define CSNN_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <random>

#include "csnn/dataset.hpp"

namespace csnn {
namespace synth {

struct P {
	double x, y;
};

using Stroke = std::vector<P>;  // polyline on the unit canvas, y pointing down

inline Stroke arc(double cx, double cy, double rx, double ry, double t0, double t1, int n = 18)
{
	Stroke s;
	for (int i = 0; i <= n; ++i) {
		const double t = t0 + (t1 - t0) * i / n;
		s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
	}
	return s;
}

/// Stroke sets for the ten digits. Hand-placed to be mutually
/// distinguishable after jitter, not to imitate any particular font.
inline const std::vector<std::vector<Stroke>>& glyphs()
{
	static const double pi = 3.14159265358979323846;
	static const std::vector<std::vector<Stroke>> g = [] {
		std::vector<std::vector<Stroke>> v(10);
		v[0] = {arc(0.5, 0.5, 0.26, 0.36, 0, 2 * pi, 26)};
		v[1] = {{{0.36, 0.26}, {0.55, 0.12}, {0.55, 0.88}}};
		v[2] = {arc(0.5, 0.32, 0.23, 0.19, pi, 2.3 * pi), {{0.69, 0.45}, {0.24, 0.86}, {0.78, 0.86}}};
		v[3] = {arc(0.48, 0.3, 0.22, 0.17, 1.15 * pi, 2.35 * pi),
		        arc(0.48, 0.66, 0.245, 0.21, 1.66 * pi, 2.89 * pi)};
		v[4] = {{{0.6, 0.1}, {0.22, 0.62}, {0.82, 0.62}}, {{0.63, 0.32}, {0.63, 0.9}}};
		v[5] = {{{0.73, 0.13}, {0.3, 0.13}, {0.27, 0.47}}, arc(0.47, 0.66, 0.25, 0.225, 1.52 * pi, 2.86 * pi)};
		v[6] = {{{0.67, 0.1}, {0.38, 0.5}}, arc(0.49, 0.65, 0.225, 0.215, 0, 2 * pi, 24)};
		v[7] = {{{0.22, 0.14}, {0.8, 0.14}, {0.43, 0.9}}};
		v[8] = {arc(0.5, 0.3, 0.19, 0.165, 0, 2 * pi, 22), arc(0.5, 0.675, 0.225, 0.195, 0, 2 * pi, 22)};
		v[9] = {arc(0.51, 0.34, 0.21, 0.19, 0, 2 * pi, 24), {{0.71, 0.4}, {0.63, 0.88}}};
		return v;
	}();
	return g;
}

inline double dist_to_segment(P p, P a, P b)
{
	const double vx = b.x - a.x, vy = b.y - a.y;
	const double len2 = vx * vx + vy * vy;
	double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
	t = std::clamp(t, 0.0, 1.0);
	const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
	return std::sqrt(dx * dx + dy * dy);
}

inline double dist_to_glyph(P p, const std::vector<Stroke>& strokes)
{
	double d = 1e9;
	for (const Stroke& s : strokes)
		for (std::size_t i = 0; i + 1 < s.size(); ++i) d = std::min(d, dist_to_segment(p, s[i], s[i + 1]));
	return d;
}

}  // namespace synth

/// Deterministic stand-in for a handwritten-digit set: ten stroke glyphs
/// under random shift/rotation/scale, stroke-intensity jitter and additive
/// Gaussian pixel noise. noise ~0.1 gives a task a small conv net solves at
/// 98-99.5% test accuracy.
inline LabeledDataset make_synthetic_digits(std::size_t count, std::uint64_t seed,
                                            const std::string& split, double noise = 0.1)
{
	const std::size_t hw = 28;
	LabeledDataset d;
	d.sample_shape = {1, hw, hw};
	d.split = split;
	d.labels.resize(count);
	d.pixels.resize(count * hw * hw);
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<double> uni(0.0, 1.0);
	std::normal_distribution<double> gauss(0.0, 1.0);

	// balanced labels in shuffled order
	for (std::size_t i = 0; i < count; ++i) d.labels[i] = static_cast<std::uint8_t>(i % 10);
	std::shuffle(d.labels.begin(), d.labels.end(), rng);

	for (std::size_t i = 0; i < count; ++i) {
		const auto& strokes = synth::glyphs()[d.labels[i]];
		const double angle = (uni(rng) * 2.0 - 1.0) * 0.21;  // about +-12 degrees
		const double scale = 0.85 + uni(rng) * 0.3;
		const double shift_x = (uni(rng) * 2.0 - 1.0) * 0.09;
		const double shift_y = (uni(rng) * 2.0 - 1.0) * 0.09;
		const double ink = 0.7 + uni(rng) * 0.3;
		const double thick = 0.050 + uni(rng) * 0.018;
		const double ca = std::cos(-angle), sa = std::sin(-angle);
		std::uint8_t* img = d.pixels.data() + i * hw * hw;
		for (std::size_t r = 0; r < hw; ++r) {
			for (std::size_t c = 0; c < hw; ++c) {
				// map the pixel back through the sample's inverse transform
				const double px = (c + 0.5) / hw - 0.5 - shift_x;
				const double py = (r + 0.5) / hw - 0.5 - shift_y;
				const synth::P q{(ca * px - sa * py) / scale + 0.5, (sa * px + ca * py) / scale + 0.5};
				const double dist = synth::dist_to_glyph(q, strokes);
				double v = std::clamp((thick - dist) / 0.03 + 0.5, 0.0, 1.0) * ink;
				v += gauss(rng) * noise;
				img[r * hw + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
			}
		}
	}
	d.validate();
	return d;
}

inline DatasetPair make_synthetic_pair(std::size_t train_count, std::size_t test_count,
                                       std::uint64_t seed, double noise = 0.1)
{
	DatasetPair p;
	p.train = make_synthetic_digits(train_count, seed, "train", noise);
	p.test = make_synthetic_digits(test_count, seed + 1, "test", noise);
	return p;
}

}  // namespace csnn

#endif
