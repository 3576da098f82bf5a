// Acceptance gate: one PASS/FAIL line per product requirement, exit status
// equals the number of failures. Criteria share one trained reference model;
// its training time is charged to criterion 4, which owns that pipeline.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csnn/csnn.hpp"

using namespace csnn;

namespace {

using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0)
{
	return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Gate {
	int failures = 0;
	std::vector<std::string> notes;

	void note(std::string s) { notes.push_back(std::move(s)); }

	void finish(int criterion, bool ok, double elapsed, double limit)
	{
		if (elapsed >= limit) {
			note("over time budget");
			ok = false;
		}
		std::printf("[criterion %d] %s\n", criterion, ok ? "PASS" : "FAIL");
		for (const std::string& n : notes) std::printf("    %s\n", n.c_str());
		std::printf("    elapsed %.1f s (limit %.0f s)\n", elapsed, limit);
		std::fflush(stdout);
		notes.clear();
		if (!ok) ++failures;
	}
};

/// Run one criterion body, catching anything it throws so a failure cannot
/// abort the remaining criteria. extra charges shared setup time.
template <typename F>
void run_criterion(Gate& gate, int n, double limit, double extra, F&& body)
{
	const auto t0 = Clock::now();
	bool ok = false;
	try {
		ok = body();
	} catch (const std::exception& e) {
		gate.note(std::string("exception: ") + e.what());
	}
	gate.finish(n, ok, secs_since(t0) + extra, limit);
}

std::string f2(double v)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.2f", v);
	return buf;
}

std::string f4(double v)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.4f", v);
	return buf;
}

std::string sci(double v)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.3g", v);
	return buf;
}

// ---------------------------------------------------------------- criterion 1

/// Threshold placed in the widest gap of the upper half of the observed tap
/// values: clipping stays active and the nearest kink is half a gap away.
std::pair<double, double> lambda_in_gap(std::vector<double> v)
{
	std::sort(v.begin(), v.end());
	std::size_t best = v.size() / 2;
	double gap = -1.0;
	for (std::size_t i = v.size() / 2; i + 1 < v.size(); ++i)
		if (v[i + 1] - v[i] > gap) {
			gap = v[i + 1] - v[i];
			best = i;
		}
	return {0.5 * (v[best] + v[best + 1]), gap};
}

bool criterion_threshold_gradients(Gate& gate)
{
	const struct {
		const char* arch;
		Shape input;
		std::size_t classes;
	} specs[] = {
	    {"dense:12 relu clip dense:8 relu clip dense:4", {1, 3, 3}, 4},
	    {"conv:3:3:p1 relu clip pool:2 dense:5", {1, 6, 6}, 5},
	    {"conv:2:3 bn relu clip conv:3:3:p1 relu clip dense:4", {1, 7, 7}, 4},
	    {"dense:10 relu clip dense:6", {2, 2, 2}, 6},
	    {"conv:4:3:s2:p1 bn relu clip dense:3", {1, 9, 9}, 3},
	};

	double worst = 0.0;
	int checked = 0;
	for (int trial = 0; trial < 20; ++trial) {
		const auto& sp = specs[trial % 5];
		ModelGraph g = build_architecture(sp.arch, sp.input, sp.classes, 100 + trial);

		std::mt19937_64 rng(500 + trial);
		std::normal_distribution<double> gauss(0.0, 1.0);
		Shape bs = sp.input;
		bs.insert(bs.begin(), 4);
		Tensor x(bs);
		for (double& v : x.data) v = gauss(rng);
		std::vector<std::size_t> labels_v(4);
		for (std::size_t i = 0; i < 4; ++i) labels_v[i] = i % sp.classes;

		// place each threshold away from the kinks of its own tap, in graph
		// order so later taps see the earlier choices
		const std::vector<std::size_t> clips = g.clip_nodes();
		std::vector<double> gaps;
		for (std::size_t ci : clips) {
			const std::vector<Tensor> outs = g.forward_all(x, Mode::train);
			const Tensor& tap = outs[g.nodes[ci].input];
			auto [lam, gap] = lambda_in_gap(tap.data);
			std::get<Clip>(g.nodes[ci].layer).param.lambda = lam;
			gaps.push_back(gap);
		}

		auto loss_at = [&] {
			const Tensor logits = g.forward(x, Mode::train);
			return softmax_cross_entropy(logits, labels_v).loss;
		};

		// analytic gradients
		const Tensor logits = g.forward(x, Mode::train);
		const LossResult lr = softmax_cross_entropy(logits, labels_v);
		g.zero_grads();
		g.backward(lr.dlogits);
		std::vector<double> analytic;
		for_each_clip(g, [&](ClipParam& p) { analytic.push_back(p.grad); });

		// central differences, step kept well inside the kink-free interval
		for (std::size_t k = 0; k < clips.size(); ++k) {
			ClipParam& p = std::get<Clip>(g.nodes[clips[k]].layer).param;
			const double saved = p.lambda;
			const double h = std::min(1e-5, gaps[k] / 4.0);
			p.lambda = saved + h;
			const double up = loss_at();
			p.lambda = saved - h;
			const double down = loss_at();
			p.lambda = saved;
			const double fd = (up - down) / (2.0 * h);
			const double rel =
			    std::abs(analytic[k] - fd) / std::max({std::abs(analytic[k]), std::abs(fd), 1e-8});
			worst = std::max(worst, rel);
			++checked;
		}
	}
	gate.note("worst relative error " + sci(worst) + " over " + std::to_string(checked) +
	          " thresholds in 20 graphs");
	return worst <= 1e-4;
}

// ---------------------------------------------------------------- criterion 2

bool criterion_fusion_exactness(Gate& gate, ModelGraph& trained, const LabeledDataset& test)
{
	std::mt19937_64 rng(4242);
	std::normal_distribution<double> gauss(0.0, 1.0);

	double maxdiff = 0.0;
	for (int trial = 0; trial < 100; ++trial) {
		const std::size_t ic = 1 + rng() % 4, oc = 1 + rng() % 6, k = 1 + 2 * (rng() % 2);
		Conv2d conv(ic, oc, k, 1 + rng() % 2, rng() % 2);
		for (double& v : conv.w.data) v = gauss(rng);
		for (double& v : conv.b.data) v = gauss(rng);
		BatchNormParams bn(oc);
		for (std::size_t i = 0; i < oc; ++i) {
			bn.gamma.data[i] = 0.5 + std::abs(gauss(rng));
			bn.beta.data[i] = gauss(rng);
			bn.running_mu.data[i] = gauss(rng);
			bn.running_sigma.data[i] = 0.3 + std::abs(gauss(rng));
		}
		BatchNorm bl(oc);
		bl.p = bn;

		Tensor x(Shape{2, ic, 9, 9});
		for (double& v : x.data) v = gauss(rng);
		const Tensor direct = bl.forward(conv.forward(x, Mode::eval), Mode::eval);

		FusedLayer f = fuse_batchnorm(conv.w, conv.b, bn);
		Conv2d fused = conv;
		fused.w = std::move(f.w);
		fused.b = std::move(f.b);
		const Tensor got = fused.forward(x, Mode::eval);
		for (std::size_t i = 0; i < got.numel(); ++i)
			maxdiff = std::max(maxdiff, std::abs(got.data[i] - direct.data[i]));
	}
	gate.note("max fused-vs-direct difference " + sci(maxdiff) + " over 100 random layers");

	// classification must be untouched on the trained model's test set
	ModelGraph fused = fuse_model(trained);
	const std::vector<double> zero{0.0}, one{1.0};
	std::size_t mismatches = 0;
	for (std::size_t start = 0; start < test.size(); start += 256) {
		const std::size_t n = std::min<std::size_t>(256, test.size() - start);
		std::vector<std::size_t> idx(n);
		for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
		const Tensor x = test.make_batch(idx, zero, one);
		const Tensor a = trained.forward(x, Mode::eval);
		const Tensor b = fused.forward(x, Mode::eval);
		const std::size_t classes = a.shape[1];
		for (std::size_t i = 0; i < n; ++i)
			if (argmax(a.ptr() + i * classes, classes) != argmax(b.ptr() + i * classes, classes))
				++mismatches;
	}
	gate.note("post-fusion argmax mismatches: " + std::to_string(mismatches) + " of " +
	          std::to_string(test.size()) + " test samples");
	return maxdiff <= 1e-6 && mismatches == 0;
}

// ---------------------------------------------------------------- criterion 3

bool criterion_rate_law(Gate& gate)
{
	double worst = 0.0;
	for (const std::size_t T : {10, 100, 1000}) {
		for (int i = 0; i < 50; ++i) {
			const double z = 2.0 * i / 49.0;
			double v = 0.0, spikes = 0.0;
			for (std::size_t t = 0; t < T; ++t) {
				auto [s, nv] = if_step(v, z, 1.0);
				spikes += s;
				v = nv;
			}
			const double err = std::abs(spikes / static_cast<double>(T) - std::min(z, 1.0));
			worst = std::max(worst, err - 1.0 / static_cast<double>(T));
			if (err > 1.0 / static_cast<double>(T) + 1e-15) {
				gate.note("rate error " + sci(err) + " at z=" + f4(z) +
				          " T=" + std::to_string(T));
				return false;
			}
		}
	}
	gate.note("|rate - min(z,1)| <= 1/T on all 150 grid points");
	return true;
}

// ---------------------------------------------------------------- shared eval

double snn_accuracy(SpikingNetwork& net, const LabeledDataset& test, std::size_t T)
{
	SimConfig cfg;
	cfg.T = T;
	return evaluate_snn(net, test, cfg).accuracy;
}

// ---------------------------------------------------------------- main

int run_all()
{
	Gate gate;

	// Shared fixture: a clip-trained convolutional model on the synthetic
	// digit set. Training time is charged to criterion 4 below.
	std::printf("fixture: training reference model (charged to criterion 4)\n");
	std::fflush(stdout);
	const auto fixture_t0 = Clock::now();
	DatasetPair data = make_synthetic_pair(12000, 2000, 7, 0.15);
	ModelGraph trained = build_architecture("cnet", data.train.sample_shape, 10, 42);
	OptimizerConfig train_cfg;
	train_cfg.eta = 0.1;
	train_cfg.alpha = 5e-4;  // thresholds start at 4.0 by default
	train_cfg.epochs = 12;
	train_cfg.seed = 42;
	train(trained, data, train_cfg);
	const double fixture_secs = secs_since(fixture_t0);
	const double ann_acc = evaluate(trained, data.test);
	std::printf("fixture: done in %.1f s, ann test accuracy %.2f%%\n", fixture_secs, ann_acc * 100.0);
	std::fflush(stdout);

	// 1. analytic threshold gradients match central differences
	run_criterion(gate, 1, 10.0, 0.0, [&] { return criterion_threshold_gradients(gate); });

	// 2. batchnorm fusion is exact and preserves every classification
	run_criterion(gate, 2, 30.0, 0.0,
	              [&] { return criterion_fusion_exactness(gate, trained, data.test); });

	// 3. single-neuron rate law
	run_criterion(gate, 3, 5.0, 0.0, [&] { return criterion_rate_law(gate); });

	// 4. trained model converts with at most 0.5 pp loss at T=100
	SpikingNetwork snn_tcl;
	run_criterion(gate, 4, 1800.0, fixture_secs, [&] {
		ModelGraph fused = fuse_model(trained);
		const std::vector<double> lambdas =
		    collect_norm_factors(fused, NormFactorStrategy::parse("tcl"));
		snn_tcl = normalize(fused, lambdas);
		const double snn_acc = snn_accuracy(snn_tcl, data.test, 100);
		const double loss_pp = (ann_acc - snn_acc) * 100.0;
		gate.note("ann " + f2(ann_acc * 100.0) + "%, snn@T=100 " + f2(snn_acc * 100.0) +
		          "%, conversion loss " + f2(loss_pp) + " pp");
		return ann_acc >= 0.98 && loss_pp <= 0.5;
	});

	// 5. trained thresholds beat percentile and max calibration at T=50
	run_criterion(gate, 5, 600.0, 0.0, [&] {
		ModelGraph fused = fuse_model(trained);
		const double ltcl = ann_acc - snn_accuracy(snn_tcl, data.test, 50);

		SpikingNetwork p999 = normalize(
		    fused, collect_norm_factors(fused, NormFactorStrategy::parse("percentile:0.999"),
		                                &data.train));
		const double lp = ann_acc - snn_accuracy(p999, data.test, 50);

		SpikingNetwork mx = normalize(
		    fused, collect_norm_factors(fused, NormFactorStrategy::parse("max"), &data.train));
		const double lm = ann_acc - snn_accuracy(mx, data.test, 50);

		gate.note("conversion loss @T=50: tcl " + f4(ltcl * 100.0) + " pp, percentile-99.9 " +
		          f4(lp * 100.0) + " pp, max " + f4(lm * 100.0) + " pp");
		return ltcl <= lp && ltcl <= lm;
	});

	// 6. stronger threshold decay buys low-latency accuracy
	run_criterion(gate, 6, 3600.0, 0.0, [&] {
		DatasetPair hard = make_synthetic_pair(12000, 2000, 7, 0.85);
		AlphaCompareOptions opt;
		opt.alphas = {1e-4, 1e-3};
		opt.T_list = {20};
		opt.arch = "cnet";
		opt.base.eta = 0.1;
		opt.base.epochs = 30;
		opt.base.seed = 42;
		// constant learning rate: the threshold decay then separates the two
		// runs far enough (about 2.3 vs 3.8) for the latency gap to show
		opt.base.schedule.clear();
		opt.strategy = NormFactorStrategy::parse("tcl");
		opt.measure_time = false;
		const std::vector<AlphaRecord> recs = run_alpha_comparison(hard, opt);
		const AlphaRecord& lo = recs[0];   // alpha = 1e-4
		const AlphaRecord& hi = recs[1];   // alpha = 1e-3
		gate.note("alpha 1e-4: mean lambda " + f4(lo.mean_lambda) + ", ann " + f2(lo.ann_acc * 100.0) +
		          "%, snn@T=20 " + f2(lo.snn_acc * 100.0) + "%");
		gate.note("alpha 1e-3: mean lambda " + f4(hi.mean_lambda) + ", ann " + f2(hi.ann_acc * 100.0) +
		          "%, snn@T=20 " + f2(hi.snn_acc * 100.0) + "%");
		return hi.mean_lambda < lo.mean_lambda && hi.snn_acc > lo.snn_acc &&
		       hi.ann_acc <= lo.ann_acc;
	});

	// 7. accuracy is monotone in latency up to the noise allowance
	run_criterion(gate, 7, 1200.0, 0.0, [&] {
		SweepOptions opt;
		opt.T_list = {25, 50, 100, 200, 400};
		opt.strategy = NormFactorStrategy::parse("tcl");
		const std::vector<SweepRecord> recs = run_latency_sweep(trained, data, opt);
		bool ok = true;
		std::string curve;
		for (std::size_t i = 0; i < recs.size(); ++i) {
			if (i) {
				curve += " ";
				if (recs[i].snn_acc < recs[i - 1].snn_acc - 0.003) ok = false;
			}
			curve += "T" + std::to_string(recs[i].T) + "=" + f2(recs[i].snn_acc * 100.0) + "%";
		}
		if (recs.back().conv_loss_pp > recs.front().conv_loss_pp) ok = false;
		gate.note(curve);
		gate.note("loss @T=400 " + f4(recs.back().conv_loss_pp) + " pp vs @T=25 " +
		          f4(recs.front().conv_loss_pp) + " pp");
		return ok;
	});

	// 8. determinism and persistence
	run_criterion(gate, 8, 300.0, 0.0, [&] {
		DatasetPair small = make_synthetic_pair(512, 128, 3, 0.1);
		OptimizerConfig cfg;
		cfg.epochs = 2;
		cfg.eta = 0.05;
		cfg.seed = 11;
		auto run_once = [&] {
			ModelGraph g =
			    build_architecture("conv:4:3:p1 bn relu clip pool:2 dense:10", small.train.sample_shape,
			                       10, cfg.seed);
			TrainReport rep = train(g, small, cfg);
			return std::pair<ModelGraph, TrainReport>(std::move(g), std::move(rep));
		};
		auto [g1, rep1] = run_once();
		auto [g2, rep2] = run_once();
		const bool reports_equal = rep1 == rep2;

		std::ostringstream csv1, csv2;
		write_train_report_csv(rep1, csv1);
		write_train_report_csv(rep2, csv2);
		const bool report_csv_equal = csv1.str() == csv2.str();

		SweepOptions sw;
		sw.T_list = {5, 10};
		sw.strategy = NormFactorStrategy::parse("tcl");
		sw.measure_time = false;
		std::ostringstream sweep1, sweep2;
		write_sweep_csv(run_latency_sweep(g1, small, sw), sweep1);
		write_sweep_csv(run_latency_sweep(g1, small, sw), sweep2);
		const bool sweep_equal = sweep1.str() == sweep2.str();

		const std::string m1 = "/tmp/csnn_accept_a.csnn", m2 = "/tmp/csnn_accept_b.csnn";
		ModelFileMeta meta;
		meta.seed = cfg.seed;
		save_model(g1, meta, m1);
		LoadedModel back = load_model(m1);
		save_model(back.graph, back.meta, m2);
		auto slurp = [](const std::string& p) {
			std::ifstream in(p, std::ios::binary);
			std::ostringstream ss;
			ss << in.rdbuf();
			return ss.str();
		};
		const std::string bytes1 = slurp(m1), bytes2 = slurp(m2);
		const bool file_equal = !bytes1.empty() && bytes1 == bytes2;
		std::remove(m1.c_str());
		std::remove(m2.c_str());

		gate.note(std::string("train reports equal: ") + (reports_equal ? "yes" : "NO") +
		          ", report csv byte-identical: " + (report_csv_equal ? "yes" : "NO"));
		gate.note(std::string("sweep csv byte-identical: ") + (sweep_equal ? "yes" : "NO") +
		          ", model file round-trip byte-identical: " + (file_equal ? "yes" : "NO"));
		return reports_equal && report_csv_equal && sweep_equal && file_equal;
	});

	// 9. charge conservation over long runs
	run_criterion(gate, 9, 5.0, 0.0, [&] {
		std::mt19937_64 rng(99);
		std::uniform_real_distribution<double> uz(-0.5, 1.5), uv(0.0, 1.0);
		const std::size_t T = 1000;
		double worst = 0.0;
		for (int n = 0; n < 1000; ++n) {
			const double v0 = uv(rng);
			double v = v0, zsum = 0.0, spikes = 0.0;
			for (std::size_t t = 0; t < T; ++t) {
				const double z = uz(rng);
				auto [s, nv] = if_step(v, z, 1.0);
				zsum += z;
				spikes += s;
				v = nv;
			}
			worst = std::max(worst, std::abs(zsum - (1.0 * spikes + v - v0)));
		}
		gate.note("worst |sum(z) - (spikes + V_T - V_0)| = " + sci(worst) +
		          " (bound " + sci(1e-9 * static_cast<double>(T)) + ")");
		return worst <= 1e-9 * static_cast<double>(T);
	});

	std::printf("%d of 9 criteria failed\n", gate.failures);
	return gate.failures;
}

}  // namespace

int main()
{
	try {
		return run_all();
	} catch (const std::exception& e) {
		std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
		return 100;
	}
}
