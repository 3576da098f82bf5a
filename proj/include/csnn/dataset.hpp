#ifndef CSNN_DATASET_HPP
#define CSNN_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "csnn/tensor.hpp"

namespace csnn {

/// Images stored as raw bytes (pixel/255 happens at batch assembly), labels
/// as class indices.
struct LabeledDataset {
	Shape sample_shape;  // (C,H,W)
	std::vector<std::uint8_t> pixels;
	std::vector<std::uint8_t> labels;
	std::string split;  // "train" or "test"
	std::size_t classes = 10;

	std::size_t size() const { return labels.size(); }

	void validate() const
	{
		const std::size_t n = shape_numel(sample_shape);
		if (n == 0) throw data_error("dataset: empty sample shape");
		if (pixels.size() != labels.size() * n)
			throw data_error("dataset: " + std::to_string(pixels.size()) + " pixel bytes for " +
			                 std::to_string(labels.size()) + " samples of " + std::to_string(n) + " each");
		for (std::size_t i = 0; i < labels.size(); ++i)
			if (labels[i] >= classes)
				throw data_error("dataset: label " + std::to_string(labels[i]) + " at sample " +
				                 std::to_string(i) + " exceeds " + std::to_string(classes) + " classes");
	}

	/// Assemble [batch, C, H, W] doubles: pixel/255, then per-channel
	/// (x - mean) / std. mean/std may be a single entry broadcast over
	/// channels.
	Tensor make_batch(const std::vector<std::size_t>& idx, const std::vector<double>& mean,
	                  const std::vector<double>& stddev) const
	{
		const std::size_t per = shape_numel(sample_shape);
		const std::size_t c = sample_shape[0], spatial = per / c;
		auto channel_param = [&](const std::vector<double>& v, std::size_t ch, const char* what) {
			if (v.size() == 1) return v[0];
			if (v.size() != c)
				throw usage_error(std::string("dataset: ") + what + " needs 1 or " + std::to_string(c) +
				                  " entries, got " + std::to_string(v.size()));
			return v[ch];
		};
		Shape bs = sample_shape;
		bs.insert(bs.begin(), idx.size());
		Tensor out(bs);
		for (std::size_t b = 0; b < idx.size(); ++b) {
			if (idx[b] >= size())
				throw usage_error("dataset: sample index " + std::to_string(idx[b]) + " out of range");
			const std::uint8_t* src = pixels.data() + idx[b] * per;
			double* dst = out.ptr() + b * per;
			for (std::size_t ch = 0; ch < c; ++ch) {
				const double m = channel_param(mean, ch, "mean");
				const double s = channel_param(stddev, ch, "std");
				if (!(s > 0.0)) throw usage_error("dataset: std must be positive");
				for (std::size_t j = 0; j < spatial; ++j)
					dst[ch * spatial + j] = (src[ch * spatial + j] / 255.0 - m) / s;
			}
		}
		return out;
	}

	std::vector<std::size_t> gather_labels(const std::vector<std::size_t>& idx) const
	{
		std::vector<std::size_t> out(idx.size());
		for (std::size_t b = 0; b < idx.size(); ++b) out[b] = labels[idx[b]];
		return out;
	}
};

struct DatasetPair {
	LabeledDataset train, test;
};

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& file, std::size_t offset)
{
	unsigned char b[4];
	if (!in.read(reinterpret_cast<char*>(b), 4))
		throw data_error(file + ": truncated at byte " + std::to_string(offset) +
		                 ", expected 4 more bytes");
	return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
	       std::uint32_t(b[3]);
}

inline std::size_t file_size_or_throw(const std::string& path)
{
	std::error_code ec;
	const auto sz = std::filesystem::file_size(path, ec);
	if (ec) throw data_error(path + ": cannot stat file");
	return static_cast<std::size_t>(sz);
}

}  // namespace detail

/// IDX image file: u32 magic 0x00000803, count, rows, cols, then raw bytes.
inline void load_idx_images(const std::string& path, std::vector<std::uint8_t>& pixels,
                            std::size_t& count, std::size_t& rows, std::size_t& cols)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) throw data_error(path + ": cannot open");
	const std::uint32_t magic = detail::read_u32_be(in, path, 0);
	if (magic != 0x00000803u)
		throw data_error(path + ": bad image magic at byte 0, expected 0x00000803");
	count = detail::read_u32_be(in, path, 4);
	rows = detail::read_u32_be(in, path, 8);
	cols = detail::read_u32_be(in, path, 12);
	const std::size_t expected = 16 + count * rows * cols;
	const std::size_t actual = detail::file_size_or_throw(path);
	if (actual != expected)
		throw data_error(path + ": expected " + std::to_string(expected) + " bytes for " +
		                 std::to_string(count) + " images of " + std::to_string(rows) + "x" +
		                 std::to_string(cols) + ", file has " + std::to_string(actual));
	pixels.resize(count * rows * cols);
	if (!in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
		throw data_error(path + ": truncated at byte 16");
}

/// IDX label file: u32 magic 0x00000801, count, then raw label bytes.
inline void load_idx_labels(const std::string& path, std::vector<std::uint8_t>& labels,
                            std::size_t& count)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) throw data_error(path + ": cannot open");
	const std::uint32_t magic = detail::read_u32_be(in, path, 0);
	if (magic != 0x00000801u)
		throw data_error(path + ": bad label magic at byte 0, expected 0x00000801");
	count = detail::read_u32_be(in, path, 4);
	const std::size_t expected = 8 + count;
	const std::size_t actual = detail::file_size_or_throw(path);
	if (actual != expected)
		throw data_error(path + ": expected " + std::to_string(expected) + " bytes for " +
		                 std::to_string(count) + " labels, file has " + std::to_string(actual));
	labels.resize(count);
	if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size())))
		throw data_error(path + ": truncated at byte 8");
}

inline LabeledDataset load_idx_pair(const std::string& image_path, const std::string& label_path,
                                    const std::string& split)
{
	LabeledDataset d;
	std::size_t n = 0, rows = 0, cols = 0, nl = 0;
	load_idx_images(image_path, d.pixels, n, rows, cols);
	load_idx_labels(label_path, d.labels, nl);
	if (n != nl)
		throw data_error(image_path + ": " + std::to_string(n) + " images but " + std::to_string(nl) +
		                 " labels in " + label_path);
	d.sample_shape = {1, rows, cols};
	d.split = split;
	d.validate();
	return d;
}

/// Load the four conventional IDX files from a directory.
inline DatasetPair load_mnist(const std::string& dir)
{
	const std::filesystem::path p(dir);
	DatasetPair out;
	out.train = load_idx_pair((p / "train-images-idx3-ubyte").string(),
	                          (p / "train-labels-idx1-ubyte").string(), "train");
	out.test = load_idx_pair((p / "t10k-images-idx3-ubyte").string(),
	                         (p / "t10k-labels-idx1-ubyte").string(), "test");
	return out;
}

/// One 3073-byte record per sample: label byte, then 1024 bytes each of R, G,
/// B planes.
inline void load_cifar10_file(const std::string& path, LabeledDataset& d)
{
	const std::size_t sz = detail::file_size_or_throw(path);
	if (sz == 0 || sz % 3073 != 0)
		throw data_error(path + ": size " + std::to_string(sz) +
		                 " is not a multiple of the 3073-byte record");
	std::ifstream in(path, std::ios::binary);
	if (!in) throw data_error(path + ": cannot open");
	const std::size_t n = sz / 3073;
	std::vector<std::uint8_t> rec(3073);
	for (std::size_t i = 0; i < n; ++i) {
		if (!in.read(reinterpret_cast<char*>(rec.data()), 3073))
			throw data_error(path + ": truncated at record " + std::to_string(i));
		if (rec[0] > 9)
			throw data_error(path + ": record " + std::to_string(i) + " has label byte " +
			                 std::to_string(rec[0]) + ", labels are 0-9");
		d.labels.push_back(rec[0]);
		d.pixels.insert(d.pixels.end(), rec.begin() + 1, rec.end());
	}
}

inline DatasetPair load_cifar10(const std::string& dir)
{
	const std::filesystem::path p(dir);
	DatasetPair out;
	out.train.sample_shape = {3, 32, 32};
	out.train.split = "train";
	for (int i = 1; i <= 5; ++i)
		load_cifar10_file((p / ("data_batch_" + std::to_string(i) + ".bin")).string(), out.train);
	out.test.sample_shape = {3, 32, 32};
	out.test.split = "test";
	load_cifar10_file((p / "test_batch.bin").string(), out.test);
	out.train.validate();
	out.test.validate();
	return out;
}

namespace detail {

inline void write_u32_be(std::ostream& out, std::uint32_t v)
{
	const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
	                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
	out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

/// Write a dataset as an IDX image/label file pair (single-channel only).
inline void write_idx_pair(const LabeledDataset& d, const std::string& image_path,
                           const std::string& label_path)
{
	if (d.sample_shape.size() != 3 || d.sample_shape[0] != 1)
		throw usage_error("dataset: IDX export requires (1,H,W) samples, got " +
		                  shape_str(d.sample_shape));
	std::ofstream img(image_path, std::ios::binary);
	if (!img) throw data_error(image_path + ": cannot write");
	detail::write_u32_be(img, 0x00000803u);
	detail::write_u32_be(img, static_cast<std::uint32_t>(d.size()));
	detail::write_u32_be(img, static_cast<std::uint32_t>(d.sample_shape[1]));
	detail::write_u32_be(img, static_cast<std::uint32_t>(d.sample_shape[2]));
	img.write(reinterpret_cast<const char*>(d.pixels.data()),
	          static_cast<std::streamsize>(d.pixels.size()));
	std::ofstream lab(label_path, std::ios::binary);
	if (!lab) throw data_error(label_path + ": cannot write");
	detail::write_u32_be(lab, 0x00000801u);
	detail::write_u32_be(lab, static_cast<std::uint32_t>(d.size()));
	lab.write(reinterpret_cast<const char*>(d.labels.data()),
	          static_cast<std::streamsize>(d.labels.size()));
}

}  // namespace csnn

#endif
