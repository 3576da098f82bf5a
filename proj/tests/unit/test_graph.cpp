#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "csnn/graph.hpp"
#include "helpers.hpp"

using namespace csnn;

namespace {

ModelGraph tiny_dense_graph(std::mt19937_64& rng)
{
	ModelGraph g;
	g.input_shape = {3};
	Dense d(3, 2);
	testutil::randomize(d.w, rng, 0.5);
	testutil::randomize(d.b, rng, 0.5);
	g.add(std::move(d));
	return g;
}

}  // namespace

TEST_CASE("graph validation rejects malformed wiring") {
	std::mt19937_64 rng(5);

	SECTION("empty graph") {
		ModelGraph g;
		g.input_shape = {3};
		CHECK_THROWS_AS(g.validate(), usage_error);
	}

	SECTION("forward reference") {
		ModelGraph g = tiny_dense_graph(rng);
		g.nodes[0].input = 0;  // self reference
		CHECK_THROWS_AS(g.validate(), usage_error);
	}

	SECTION("two terminals") {
		ModelGraph g;
		g.input_shape = {3};
		g.add(ReLU{}, -1);
		g.add(ReLU{}, -1);
		CHECK_THROWS_AS(g.validate(), usage_error);
	}

	SECTION("geometry mismatch names the node and kind") {
		ModelGraph g;
		g.input_shape = {3};
		g.add(Dense(4, 2));
		try {
			g.validate();
			FAIL("expected a usage error");
		} catch (const usage_error& e) {
			const std::string msg = e.what();
			CHECK(msg.find("node 0") != std::string::npos);
			CHECK(msg.find("dense") != std::string::npos);
		}
	}
}

TEST_CASE("forward rejects input batches of the wrong shape") {
	std::mt19937_64 rng(6);
	ModelGraph g = tiny_dense_graph(rng);
	g.validate();
	Tensor bad(Shape{2, 4});
	CHECK_THROWS_AS(g.forward(bad, Mode::eval), usage_error);
	Tensor unbatched(Shape{3});
	CHECK_THROWS_AS(g.forward(unbatched, Mode::eval), usage_error);
}

TEST_CASE("backward requires a training forward first") {
	std::mt19937_64 rng(7);
	ModelGraph g = tiny_dense_graph(rng);
	g.validate();
	Tensor x(Shape{1, 3});
	Tensor dy(Shape{1, 2});

	CHECK_THROWS_AS(g.backward(dy), usage_error);

	g.forward(x, Mode::eval);
	CHECK_THROWS_AS(g.backward(dy), usage_error);

	g.forward(x, Mode::train);
	CHECK_NOTHROW(g.backward(dy));

	Tensor wrong(Shape{1, 3});
	CHECK_THROWS_AS(g.backward(wrong), usage_error);
}

TEST_CASE("non-finite activations raise a divergence error naming the node") {
	std::mt19937_64 rng(8);
	ModelGraph g = tiny_dense_graph(rng);
	g.add(ReLU{});
	g.validate();
	std::get<Dense>(g.nodes[0].layer).w.data[0] = std::numeric_limits<double>::infinity();
	Tensor x = Tensor::full({1, 3}, 1.0);
	try {
		g.forward(x, Mode::eval);
		FAIL("expected divergence");
	} catch (const divergence_error& e) {
		CHECK(std::string(e.what()).find("node 0") != std::string::npos);
	}
}

TEST_CASE("deep chain gradient matches finite differences end to end") {
	std::mt19937_64 rng(9);
	ModelGraph g;
	g.input_shape = {1, 6, 6};
	Conv2d c(1, 2, 3, 1, 1);
	testutil::randomize(c.w, rng, 0.6);
	testutil::randomize(c.b, rng, 0.4);
	g.add(std::move(c));
	g.add(BatchNorm(2));
	g.add(ReLU{});
	Clip cl;
	cl.param.lambda = 0.8;
	g.add(std::move(cl));
	g.add(AvgPool2d(2));
	Dense d(2 * 3 * 3, 4);
	testutil::randomize(d.w, rng, 0.6);
	testutil::randomize(d.b, rng, 0.4);
	g.add(std::move(d));
	g.validate();

	Tensor x(Shape{3, 1, 6, 6});
	testutil::randomize(x, rng);
	CHECK(testutil::max_grad_mismatch(g, x) < 1e-5);
}

TEST_CASE("zero_grads clears parameter and threshold gradients") {
	ModelGraph g;
	g.input_shape = {2};
	Dense d(2, 2);
	// unit 0 saturates the clip (threshold grad), unit 1 stays linear (weight grad)
	d.w.data = {0.5, 0.25, 0.05, 0.01};
	g.add(std::move(d));
	g.add(ReLU{});
	Clip c;
	c.param.lambda = 0.1;
	g.add(std::move(c));
	g.validate();

	Tensor x = Tensor::full({2, 2}, 1.0);
	g.forward(x, Mode::train);
	g.backward(Tensor::full({2, 2}, 1.0));

	double before = 0.0;
	for_each_param(g, [&](Tensor&, Tensor& gr) { before += gr.max_abs(); });
	for_each_clip(g, [&](ClipParam& p) { before += std::abs(p.grad); });
	CHECK(before > 0.0);

	g.zero_grads();
	double after = 0.0;
	for_each_param(g, [&](Tensor&, Tensor& gr) { after += gr.max_abs(); });
	for_each_clip(g, [&](ClipParam& p) { after += std::abs(p.grad); });
	CHECK(after == 0.0);
}

TEST_CASE("clip_nodes and has_batchnorm report structure") {
	ModelGraph g;
	g.input_shape = {2};
	g.add(Dense(2, 2));
	g.add(ReLU{});
	g.add(Clip{});
	CHECK(g.clip_nodes().size() == 1);
	CHECK_FALSE(g.has_batchnorm());
	g.add(BatchNorm(2));
	CHECK(g.has_batchnorm());
}
