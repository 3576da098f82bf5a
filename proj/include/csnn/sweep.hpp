#ifndef CSNN_SWEEP_HPP
#define CSNN_SWEEP_HPP

#include <chrono>
#include <cstdio>

#include "csnn/arch.hpp"
#include "csnn/converter.hpp"

namespace csnn {

struct SweepRecord {
	std::string strategy;
	std::size_t T = 0;
	double ann_acc = 0.0;       // fraction in [0,1]
	double snn_acc = 0.0;
	double conv_loss_pp = 0.0;  // exactly (ann_acc - snn_acc) * 100
	double mean_rate = 0.0;     // mean spike rate over integrate-and-fire layers
	double wall_ms = 0.0;
};

namespace fmt {

inline std::string raw(double v)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline std::string pct2(double v)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.2f", round2(v));
	return buf;
}

inline std::string fixed4(double v)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.4f", v);
	return buf;
}

inline std::string joined(const std::vector<double>& vs)
{
	std::string out;
	for (std::size_t i = 0; i < vs.size(); ++i) {
		if (i) out += ';';
		out += raw(vs[i]);
	}
	return out;
}

}  // namespace fmt

/// Rerun a stage and relabel any failure with it, preserving the error type.
template <class F>
auto run_stage(const char* label, F&& f) -> decltype(f())
{
	try {
		return f();
	} catch (const usage_error& e) {
		throw usage_error(std::string(label) + ": " + e.what());
	} catch (const data_error& e) {
		throw data_error(std::string(label) + ": " + e.what());
	} catch (const divergence_error& e) {
		throw divergence_error(std::string(label) + ": " + e.what());
	}
}

struct SweepOptions {
	std::vector<std::size_t> T_list{25, 50, 100, 200, 400};
	NormFactorStrategy strategy;
	bool measure_time = true;  // false writes wall_ms = 0 for byte-stable CSVs
	std::size_t calib_samples = 10000;
	std::uint64_t seed = 42;
};

/// Full accuracy-vs-latency sweep of one trained model: fuse once, pick norm
/// factors once, then simulate the test set at each T. Calibration (for
/// percentile/max) draws from the training split.
inline std::vector<SweepRecord> run_latency_sweep(const ModelGraph& trained, const DatasetPair& data,
                                                  const SweepOptions& opt,
                                                  const Normalization& norm = {})
{
	if (opt.T_list.empty()) throw usage_error("sweep: empty T list");
	for (std::size_t t : opt.T_list)
		if (t == 0) throw usage_error("sweep: T must be at least 1");

	ModelGraph work = trained;
	const double ann_acc = run_stage("evaluate", [&] { return evaluate(work, data.test, norm); });
	ModelGraph fused = run_stage("fuse", [&] { return fuse_model(work); });
	const std::vector<double> lambdas = run_stage("collect", [&] {
		return collect_norm_factors(fused, opt.strategy, &data.train, norm, opt.seed);
	});
	SpikingNetwork net = run_stage("normalize", [&] { return normalize(fused, lambdas, norm); });

	std::vector<SweepRecord> records;
	for (std::size_t T : opt.T_list) {
		SimConfig cfg;
		cfg.T = T;
		const auto t0 = std::chrono::steady_clock::now();
		const SnnEvalResult res =
		    run_stage("simulate", [&] { return evaluate_snn(net, data.test, cfg); });
		const auto t1 = std::chrono::steady_clock::now();
		SweepRecord r;
		r.strategy = opt.strategy.str();
		r.T = T;
		r.ann_acc = ann_acc;
		r.snn_acc = res.accuracy;
		r.conv_loss_pp = (ann_acc - res.accuracy) * 100.0;
		double rate_sum = 0.0;
		for (double v : res.mean_rates) rate_sum += v;
		r.mean_rate = res.mean_rates.empty() ? 0.0 : rate_sum / static_cast<double>(res.mean_rates.size());
		r.wall_ms =
		    opt.measure_time ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
		records.push_back(std::move(r));
	}
	return records;
}

/// Accuracy columns carry two decimals (percent); machine-exact duplicates
/// follow with the _raw suffix. conv_loss_pp is the difference of the
/// rounded accuracies so the printed row stays self-consistent.
inline void write_sweep_csv(const std::vector<SweepRecord>& records, std::ostream& out)
{
	out << "strategy,T,ann_acc,snn_acc,conv_loss_pp,mean_rate,wall_ms,"
	       "ann_acc_raw,snn_acc_raw,conv_loss_pp_raw,mean_rate_raw\n";
	for (const SweepRecord& r : records) {
		const double ann_pct = r.ann_acc * 100.0, snn_pct = r.snn_acc * 100.0;
		out << r.strategy << ',' << r.T << ',' << fmt::pct2(ann_pct) << ',' << fmt::pct2(snn_pct) << ','
		    << fmt::pct2(fmt::round2(ann_pct) - fmt::round2(snn_pct)) << ',' << fmt::fixed4(r.mean_rate)
		    << ',' << fmt::raw(r.wall_ms) << ',' << fmt::raw(ann_pct) << ',' << fmt::raw(snn_pct) << ','
		    << fmt::raw(r.conv_loss_pp) << ',' << fmt::raw(r.mean_rate) << '\n';
	}
}

struct AlphaRecord {
	double alpha = 0.0;
	std::size_t T = 0;
	double ann_acc = 0.0;
	double snn_acc = 0.0;
	double conv_loss_pp = 0.0;
	double mean_lambda = 0.0;
	std::vector<double> lambdas;  // final trained thresholds, graph order
	double wall_ms = 0.0;
};

struct AlphaCompareOptions {
	std::vector<double> alphas{1e-4, 1e-3};
	std::vector<std::size_t> T_list{20};
	std::string arch = "cnet";
	OptimizerConfig base;  // alpha is overridden per run; seed shared
	NormFactorStrategy strategy;
	bool measure_time = true;
};

/// Train one model per alpha from a shared seed, convert each with the same
/// strategy, and record SNN accuracy per T next to the final thresholds.
inline std::vector<AlphaRecord> run_alpha_comparison(const DatasetPair& data,
                                                     const AlphaCompareOptions& opt,
                                                     const Normalization& norm = {},
                                                     std::size_t classes = 10)
{
	if (opt.alphas.size() < 2)
		throw usage_error("alpha-compare: need at least 2 alpha values, got " +
		                  std::to_string(opt.alphas.size()));
	if (opt.T_list.empty()) throw usage_error("alpha-compare: empty T list");
	std::vector<AlphaRecord> records;
	for (const double alpha : opt.alphas) {
		OptimizerConfig cfg = opt.base;
		cfg.alpha = alpha;
		ModelGraph g = run_stage("build", [&] {
			return build_architecture(opt.arch, data.train.sample_shape, classes, cfg.seed);
		});
		run_stage("train", [&] { return train(g, data, cfg, norm); });
		const double ann_acc = run_stage("evaluate", [&] { return evaluate(g, data.test, norm); });
		std::vector<double> lambdas;
		for_each_clip(g, [&](ClipParam& p) { lambdas.push_back(p.lambda); });
		ModelGraph fused = run_stage("fuse", [&] { return fuse_model(g); });
		const std::vector<double> factors = run_stage("collect", [&] {
			return collect_norm_factors(fused, opt.strategy, &data.train, norm, cfg.seed);
		});
		SpikingNetwork net = run_stage("normalize", [&] { return normalize(fused, factors, norm); });
		for (std::size_t T : opt.T_list) {
			SimConfig sim;
			sim.T = T;
			const auto t0 = std::chrono::steady_clock::now();
			const SnnEvalResult res =
			    run_stage("simulate", [&] { return evaluate_snn(net, data.test, sim); });
			const auto t1 = std::chrono::steady_clock::now();
			AlphaRecord r;
			r.alpha = alpha;
			r.T = T;
			r.ann_acc = ann_acc;
			r.snn_acc = res.accuracy;
			r.conv_loss_pp = (ann_acc - res.accuracy) * 100.0;
			r.lambdas = lambdas;
			double lsum = 0.0;
			for (double l : lambdas) lsum += l;
			r.mean_lambda = lambdas.empty() ? 0.0 : lsum / static_cast<double>(lambdas.size());
			r.wall_ms =
			    opt.measure_time ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
			records.push_back(std::move(r));
		}
	}
	return records;
}

inline void write_alpha_csv(const std::vector<AlphaRecord>& records, std::ostream& out)
{
	out << "alpha,T,ann_acc,snn_acc,conv_loss_pp,mean_lambda,lambdas,wall_ms,"
	       "ann_acc_raw,snn_acc_raw,conv_loss_pp_raw,mean_lambda_raw\n";
	for (const AlphaRecord& r : records) {
		const double ann_pct = r.ann_acc * 100.0, snn_pct = r.snn_acc * 100.0;
		out << fmt::raw(r.alpha) << ',' << r.T << ',' << fmt::pct2(ann_pct) << ',' << fmt::pct2(snn_pct)
		    << ',' << fmt::pct2(fmt::round2(ann_pct) - fmt::round2(snn_pct)) << ','
		    << fmt::fixed4(r.mean_lambda) << ',' << fmt::joined(r.lambdas) << ',' << fmt::raw(r.wall_ms)
		    << ',' << fmt::raw(ann_pct) << ',' << fmt::raw(snn_pct) << ',' << fmt::raw(r.conv_loss_pp)
		    << ',' << fmt::raw(r.mean_lambda) << '\n';
	}
}

/// One row per epoch; losses and thresholds at full precision so equal
/// reports serialize to equal bytes.
inline void write_train_report_csv(const TrainReport& report, std::ostream& out)
{
	out << "epoch,train_loss,test_loss,test_acc,lambdas\n";
	for (std::size_t e = 0; e < report.epochs.size(); ++e) {
		const EpochStats& st = report.epochs[e];
		out << e << ',' << fmt::raw(st.train_loss) << ',' << fmt::raw(st.test_loss) << ','
		    << fmt::raw(st.test_acc) << ',' << fmt::joined(st.lambdas) << '\n';
	}
}

}  // namespace csnn

#endif
