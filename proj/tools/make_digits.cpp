// Write the synthetic digit dataset as IDX files, so the main CLI can be
// exercised end to end on machines without a local copy of MNIST.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "csnn/synth.hpp"

int main(int argc, char** argv)
{
	CLI::App app{"Generate synthetic digit IDX files"};
	std::string dir;
	std::size_t train_count = 12000, test_count = 2000;
	std::uint64_t seed = 7;
	double noise = 0.1;
	app.add_option("dir", dir, "output directory")->required();
	app.add_option("--train", train_count, "training sample count");
	app.add_option("--test", test_count, "test sample count");
	app.add_option("--seed", seed, "generator seed");
	app.add_option("--noise", noise, "pixel noise sigma");
	CLI11_PARSE(app, argc, argv);

	try {
		std::filesystem::create_directories(dir);
		const std::filesystem::path p(dir);
		const csnn::DatasetPair data = csnn::make_synthetic_pair(train_count, test_count, seed, noise);
		csnn::write_idx_pair(data.train, (p / "train-images-idx3-ubyte").string(),
		                     (p / "train-labels-idx1-ubyte").string());
		csnn::write_idx_pair(data.test, (p / "t10k-images-idx3-ubyte").string(),
		                     (p / "t10k-labels-idx1-ubyte").string());
		std::cout << "wrote " << data.train.size() << " train and " << data.test.size()
		          << " test samples to " << dir << "\n";
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	}
	return 0;
}
