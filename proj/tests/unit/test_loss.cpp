#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "csnn/loss.hpp"

using namespace csnn;

TEST_CASE("uniform logits give ln(C)") {
	Tensor logits(Shape{1, 10});
	LossResult r = softmax_cross_entropy(logits, {3});
	CHECK(r.loss == Catch::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("saturated correct class gives near-zero loss") {
	Tensor logits(Shape{1, 2}, {100.0, 0.0});
	LossResult r = softmax_cross_entropy(logits, {0});
	CHECK(r.loss < 1e-12);
}

TEST_CASE("loss gradient matches finite differences") {
	std::mt19937_64 rng(3);
	std::uniform_real_distribution<double> d(-2.0, 2.0);
	Tensor logits(Shape{3, 5});
	for (double& v : logits.data) v = d(rng);
	const std::vector<std::size_t> labels{4, 0, 2};

	LossResult r = softmax_cross_entropy(logits, labels);
	const double eps = 1e-6;
	for (std::size_t i = 0; i < logits.numel(); ++i) {
		Tensor lp = logits, lm = logits;
		lp.data[i] += eps;
		lm.data[i] -= eps;
		const double fd = (softmax_cross_entropy(lp, labels).loss -
		                   softmax_cross_entropy(lm, labels).loss) / (2.0 * eps);
		CHECK(r.dlogits.data[i] == Catch::Approx(fd).margin(1e-6));
	}
}

TEST_CASE("loss validates shapes and labels") {
	Tensor logits(Shape{2, 3});
	CHECK_THROWS_AS(softmax_cross_entropy(logits, {0}), usage_error);
	CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 3}), data_error);
	Tensor rank1(Shape{3});
	CHECK_THROWS_AS(softmax_cross_entropy(rank1, {0}), usage_error);
}

TEST_CASE("large logits stay numerically stable") {
	Tensor logits(Shape{1, 3}, {1000.0, 999.0, -1000.0});
	LossResult r = softmax_cross_entropy(logits, {0});
	CHECK(std::isfinite(r.loss));
	CHECK(r.loss == Catch::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));
}
