#include <catch2/catch_amalgamated.hpp>

#include "csnn/clip.hpp"
#include "csnn/layers.hpp"
#include "csnn/trainer.hpp"

using namespace csnn;

TEST_CASE("clip forward clamps at the threshold") {
	Tensor a(Shape{4}, {0.5, 4.5, 4.0, -1.0});
	Tensor y = clip_forward(a, 4.0);
	CHECK(y.data == std::vector<double>{0.5, 4.0, 4.0, -1.0});
	CHECK_THROWS_AS(clip_forward(a, 0.0), usage_error);
}

TEST_CASE("clip threshold gradient is the indicator of clamping") {
	// the boundary value itself counts as clamped
	CHECK(clipped(4.0, 4.0));
	CHECK(clipped(4.1, 4.0));
	CHECK_FALSE(clipped(3.9, 4.0));

	Tensor a(Shape{3}, {5.0, 3.0, 4.0});
	Tensor up = Tensor::full({3}, 1.0);
	ClipGrads g = clip_backward(a, 4.0, up);
	CHECK(g.grad_a.data == std::vector<double>{0.0, 1.0, 0.0});
	CHECK(g.grad_lambda == 2.0);

	Tensor mismatched(Shape{2}, {1.0, 1.0});
	CHECK_THROWS_AS(clip_backward(a, 4.0, mismatched), usage_error);
}

TEST_CASE("clip layer accumulates the threshold gradient over clamped positions") {
	Clip layer;
	layer.param.lambda = 1.0;
	Tensor x(Shape{1, 4}, {0.5, 1.0, 2.0, -0.5});
	Tensor y = layer.forward(x, Mode::train);
	CHECK(y.data == std::vector<double>{0.5, 1.0, 1.0, -0.5});

	Tensor dy = Tensor::full({1, 4}, 1.0);
	Tensor dx = layer.backward(dy);
	CHECK(dx.data == std::vector<double>{1.0, 0.0, 0.0, 1.0});
	CHECK(layer.param.grad == 2.0);
}

TEST_CASE("clip layer rejects non-positive thresholds") {
	Clip layer;
	layer.param.lambda = 0.0;
	Tensor x(Shape{1, 1}, {0.5});
	CHECK_THROWS_AS(layer.forward(x, Mode::eval), usage_error);
}

TEST_CASE("threshold update rule") {
	// no loss gradient: pure weighted decay of the threshold
	CHECK(lambda_update(4.0, 0.1, 0.01, 0.0) == Catch::Approx(3.996).margin(1e-12));
	// decay plus loss gradient
	CHECK(lambda_update(4.0, 0.1, 0.01, 0.5) == Catch::Approx(3.946).margin(1e-12));
	// floored away from zero
	CHECK(lambda_update(0.001, 1.0, 0.0, 5.0) == 0.001);
	CHECK(lambda_update(0.5, 1.0, 0.0, 10.0) == 0.001);
}

TEST_CASE("default threshold starts at 4") {
	ClipParam p;
	CHECK(p.lambda == 4.0);
	CHECK(p.grad == 0.0);
}
