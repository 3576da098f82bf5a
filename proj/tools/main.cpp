// Command-line driver: train models, fuse batchnorm, convert to spiking
// networks, simulate, and produce the sweep / alpha-comparison CSVs.

#include <filesystem>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "csnn/csnn.hpp"

namespace {

using namespace csnn;

std::vector<double> parse_doubles(const std::string& s, const char* what)
{
	std::vector<double> out;
	std::istringstream in(s);
	std::string tok;
	while (std::getline(in, tok, ';')) {
		try {
			std::size_t pos = 0;
			out.push_back(std::stod(tok, &pos));
			if (pos != tok.size()) throw std::invalid_argument("");
		} catch (const std::exception&) {
			throw usage_error(std::string(what) + ": bad number '" + tok + "' in '" + s + "'");
		}
	}
	if (out.empty()) throw usage_error(std::string(what) + ": empty list");
	return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, const char* what)
{
	std::vector<std::size_t> out;
	for (double v : parse_doubles(s, what)) {
		if (v < 1.0 || v != std::floor(v))
			throw usage_error(std::string(what) + ": expected positive integers in '" + s + "'");
		out.push_back(static_cast<std::size_t>(v));
	}
	return out;
}

std::vector<std::pair<std::size_t, double>> parse_schedule(const std::string& s)
{
	std::vector<std::pair<std::size_t, double>> out;
	if (s == "none" || s.empty()) return out;
	std::istringstream in(s);
	std::string tok;
	while (std::getline(in, tok, ';')) {
		const auto colon = tok.find(':');
		if (colon == std::string::npos)
			throw usage_error("schedule: expected EPOCH:MULT pairs, got '" + tok + "'");
		try {
			out.emplace_back(std::stoul(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
		} catch (const std::exception&) {
			throw usage_error("schedule: bad pair '" + tok + "'");
		}
	}
	return out;
}

OptimizerConfig optimizer_from(const Config& cfg)
{
	OptimizerConfig oc;
	oc.eta = cfg.get_f64("eta", oc.eta);
	oc.alpha = cfg.get_f64("alpha", oc.alpha);
	oc.weight_decay = cfg.get_f64("weight_decay", oc.weight_decay);
	oc.momentum = cfg.get_f64("momentum", oc.momentum);
	oc.epochs = cfg.get_u64("epochs", oc.epochs);
	oc.batch_size = cfg.get_u64("batch_size", oc.batch_size);
	oc.seed = cfg.get_u64("seed", oc.seed);
	if (cfg.has("schedule")) oc.schedule = parse_schedule(cfg.get_str("schedule", ""));
	oc.validate();
	return oc;
}

Normalization normalization_from(const Config& cfg)
{
	Normalization n;
	if (cfg.has("norm_mean")) n.mean = parse_doubles(cfg.get_str("norm_mean", ""), "norm_mean");
	if (cfg.has("norm_std")) n.stddev = parse_doubles(cfg.get_str("norm_std", ""), "norm_std");
	return n;
}

DatasetPair dataset_from(const Config& cfg)
{
	const std::string kind = cfg.get_str("dataset", "mnist");
	if (kind == "synth")
		return make_synthetic_pair(cfg.get_u64("synth_train", 12000), cfg.get_u64("synth_test", 2000),
		                           cfg.get_u64("synth_seed", 7), cfg.get_f64("synth_noise", 0.1));
	const std::string dir = cfg.get_str("data", "");
	if (dir.empty())
		throw usage_error("dataset '" + kind + "' needs data=DIR (or --data DIR)");
	if (kind == "mnist") return load_mnist(dir);
	if (kind == "cifar10") return load_cifar10(dir);
	throw usage_error("unknown dataset '" + kind + "' (mnist, cifar10, synth)");
}

/// Canonical key=value state of this run, written next to the primary output.
void write_resolved(const Config& cfg, const std::string& out_path)
{
	if (out_path.empty()) return;
	cfg.write_file(out_path + ".config");
}

void fill_defaults(Config& cfg)
{
	auto def = [&](const char* k, const std::string& v) {
		if (!cfg.has(k)) cfg.set(k, v);
	};
	def("dataset", "mnist");
	def("arch", "cnet");
	def("classes", "10");
	def("seed", "42");
	def("eta", "0.01");
	def("alpha", "0.0005");
	def("weight_decay", "0");
	def("momentum", "0.9");
	def("epochs", "30");
	def("batch_size", "64");
	def("schedule", "15:0.1;25:0.1");
	def("strategy", "tcl");
	def("timing", "real");
}

int run_cli(int argc, char** argv)
{
	CLI::App app{"Clip-trained ANN to spiking network conversion toolkit"};
	app.require_subcommand(1);

	std::string config_path;
	std::vector<std::string> overrides;
	app.add_option("--config", config_path, "key=value configuration file");
	app.add_option("--set", overrides, "override a config key, KEY=VALUE (repeatable)");

	Config cfg;
	std::function<void()> action;

	auto common = [&](CLI::App* sub) { sub->fallthrough(); };
	auto materialize = [&] {
		if (!config_path.empty()) cfg = Config::parse_file(config_path);
		for (const std::string& kv : overrides) cfg.parse_line(kv, "--set", 0);
	};

	// train ------------------------------------------------------------
	auto* train_cmd = app.add_subcommand("train", "Train a model and save it");
	std::string train_out = "model.csnn", train_report_path, train_data;
	std::uint64_t seed_flag = 0;
	bool seed_given = false;
	train_cmd->add_option("--out", train_out, "output model file");
	train_cmd->add_option("--report", train_report_path, "per-epoch training report CSV");
	train_cmd->add_option("--data", train_data, "dataset directory");
	train_cmd->add_option("--seed", seed_flag, "random seed")->each([&](const std::string&) {
		seed_given = true;
	});
	common(train_cmd);
	train_cmd->callback([&] {
		action = [&] {
			materialize();
			if (!train_data.empty()) cfg.set("data", train_data);
			if (seed_given) cfg.set("seed", std::to_string(seed_flag));
			fill_defaults(cfg);
			const DatasetPair data = dataset_from(cfg);
			const Normalization norm = normalization_from(cfg);
			const OptimizerConfig oc = optimizer_from(cfg);
			ModelGraph g = build_architecture(cfg.get_str("arch", "cnet"), data.train.sample_shape,
			                                  cfg.get_u64("classes", 10), oc.seed);
			const TrainReport report = train(g, data, oc, norm);
			ModelFileMeta meta;
			meta.seed = oc.seed;
			meta.config_hash = cfg.hash();
			save_model(g, meta, train_out);
			if (!train_report_path.empty()) {
				std::ofstream rep(train_report_path);
				if (!rep) throw data_error(train_report_path + ": cannot write");
				write_train_report_csv(report, rep);
			}
			write_resolved(cfg, train_out);
			const EpochStats& last = report.epochs.back();
			std::cout << "trained " << cfg.get_str("arch", "cnet") << ": test_acc="
			          << fmt::pct2(last.test_acc * 100.0) << "% test_loss=" << fmt::raw(last.test_loss)
			          << " model=" << train_out << "\n";
		};
	});

	// fuse ---------------------------------------------------------------
	auto* fuse_cmd = app.add_subcommand("fuse", "Fold batchnorm into the preceding layers");
	std::string fuse_in, fuse_out = "fused.csnn";
	fuse_cmd->add_option("--model", fuse_in, "trained model file")->required();
	fuse_cmd->add_option("--out", fuse_out, "output model file");
	common(fuse_cmd);
	fuse_cmd->callback([&] {
		action = [&] {
			materialize();
			fill_defaults(cfg);
			LoadedModel m = load_model(fuse_in);
			if (m.meta.snn) throw usage_error("fuse: '" + fuse_in + "' is already a spiking model");
			const ModelGraph fused = fuse_model(m.graph);
			save_model(fused, m.meta, fuse_out);
			write_resolved(cfg, fuse_out);
			std::cout << "fused " << fuse_in << " -> " << fuse_out << "\n";
		};
	});

	// convert -----------------------------------------------------------
	auto* conv_cmd = app.add_subcommand("convert", "Convert a trained model to a spiking network");
	std::string conv_in, conv_out = "snn.csnn", conv_data, conv_strategy;
	conv_cmd->add_option("--model", conv_in, "trained model file")->required();
	conv_cmd->add_option("--out", conv_out, "output spiking model file");
	conv_cmd->add_option("--data", conv_data, "dataset directory (calibration)");
	conv_cmd->add_option("--strategy", conv_strategy, "tcl | percentile[:P] | max");
	common(conv_cmd);
	conv_cmd->callback([&] {
		action = [&] {
			materialize();
			if (!conv_data.empty()) cfg.set("data", conv_data);
			if (!conv_strategy.empty()) cfg.set("strategy", conv_strategy);
			fill_defaults(cfg);
			const NormFactorStrategy strategy = NormFactorStrategy::parse(cfg.get_str("strategy", "tcl"));
			const Normalization norm = normalization_from(cfg);
			LoadedModel m = load_model(conv_in);
			if (m.meta.snn) throw usage_error("convert: '" + conv_in + "' is already a spiking model");
			ModelGraph fused = m.graph.has_batchnorm() ? fuse_model(m.graph) : m.graph;
			std::vector<double> lambdas;
			if (strategy.kind == NormFactorStrategy::Kind::tcl) {
				lambdas = collect_norm_factors(fused, strategy);
			} else {
				const DatasetPair data = dataset_from(cfg);
				lambdas = collect_norm_factors(fused, strategy, &data.train, norm,
				                               cfg.get_u64("seed", 42));
			}
			SpikingNetwork net = normalize(fused, lambdas, norm);
			ModelFileMeta meta = m.meta;
			meta.config_hash = cfg.hash();
			save_snn(net, meta, conv_out);
			write_resolved(cfg, conv_out);
			std::cout << "converted with strategy " << strategy.str() << ", norm factors "
			          << fmt::joined(lambdas) << " -> " << conv_out << "\n";
		};
	});

	// simulate -----------------------------------------------------------
	auto* sim_cmd = app.add_subcommand("simulate", "Run a spiking model over the test set");
	std::string sim_in, sim_data;
	std::size_t sim_T = 100;
	long long sim_index = -1;
	sim_cmd->add_option("--model", sim_in, "spiking model file")->required();
	sim_cmd->add_option("--data", sim_data, "dataset directory");
	sim_cmd->add_option("--T", sim_T, "simulation latency in steps");
	sim_cmd->add_option("--index", sim_index, "simulate a single test sample instead");
	common(sim_cmd);
	sim_cmd->callback([&] {
		action = [&] {
			materialize();
			if (!sim_data.empty()) cfg.set("data", sim_data);
			fill_defaults(cfg);
			SpikingNetwork net = load_snn(sim_in);
			const DatasetPair data = dataset_from(cfg);
			SimConfig sc;
			sc.T = sim_T;
			if (sim_index >= 0) {
				if (static_cast<std::size_t>(sim_index) >= data.test.size())
					throw usage_error("simulate: --index out of range");
				const std::vector<double> zero{0.0}, one{1.0};
				const Tensor batch =
				    data.test.make_batch({static_cast<std::size_t>(sim_index)}, zero, one);
				Tensor sample(net.input_shape,
				              std::vector<double>(batch.data.begin(), batch.data.end()));
				sc.record_rates = true;
				const auto [cls, rec] = simulate(net, sample, sc);
				std::cout << "sample " << sim_index << ": predicted " << cls << ", label "
				          << int(data.test.labels[sim_index]) << ", output counts";
				for (double c : rec.counts.back().data) std::cout << ' ' << c;
				std::cout << "\n";
				return;
			}
			const SnnEvalResult res = evaluate_snn(net, data.test, sc);
			std::cout << "snn_acc=" << fmt::pct2(res.accuracy * 100.0) << "% (raw "
			          << fmt::raw(res.accuracy) << ") T=" << sc.T << " mean_rates=";
			std::cout << fmt::joined(res.mean_rates) << "\n";
		};
	});

	// sweep ---------------------------------------------------------------
	auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy-vs-latency sweep CSV");
	std::string sweep_in, sweep_data, sweep_out = "sweep.csv", sweep_T_list, sweep_strategy;
	sweep_cmd->add_option("--model", sweep_in, "trained model file")->required();
	sweep_cmd->add_option("--data", sweep_data, "dataset directory");
	sweep_cmd->add_option("--out", sweep_out, "output CSV path");
	sweep_cmd->add_option("--T-list", sweep_T_list, "latencies, e.g. 25;50;100;200;400");
	sweep_cmd->add_option("--strategy", sweep_strategy, "tcl | percentile[:P] | max");
	common(sweep_cmd);
	sweep_cmd->callback([&] {
		action = [&] {
			materialize();
			if (!sweep_data.empty()) cfg.set("data", sweep_data);
			if (!sweep_T_list.empty()) cfg.set("T_list", sweep_T_list);
			if (!sweep_strategy.empty()) cfg.set("strategy", sweep_strategy);
			fill_defaults(cfg);
			if (!cfg.has("T_list")) cfg.set("T_list", "25;50;100;200;400");
			LoadedModel m = load_model(sweep_in);
			if (m.meta.snn) throw usage_error("sweep: '" + sweep_in + "' is already a spiking model");
			const DatasetPair data = dataset_from(cfg);
			SweepOptions opt;
			opt.T_list = parse_sizes(cfg.get_str("T_list", ""), "T_list");
			opt.strategy = NormFactorStrategy::parse(cfg.get_str("strategy", "tcl"));
			opt.measure_time = cfg.get_str("timing", "real") != "none";
			opt.seed = cfg.get_u64("seed", 42);
			const std::vector<SweepRecord> records =
			    run_latency_sweep(m.graph, data, opt, normalization_from(cfg));
			std::ofstream out(sweep_out);
			if (!out) throw data_error(sweep_out + ": cannot write");
			write_sweep_csv(records, out);
			write_resolved(cfg, sweep_out);
			std::cout << "wrote " << records.size() << " rows to " << sweep_out << "\n";
		};
	});

	// alpha-compare --------------------------------------------------------
	auto* alpha_cmd = app.add_subcommand("alpha-compare", "Train per alpha and compare SNN accuracy");
	std::string alpha_data, alpha_out = "alpha.csv", alpha_list, alpha_T_list;
	alpha_cmd->add_option("--data", alpha_data, "dataset directory");
	alpha_cmd->add_option("--out", alpha_out, "output CSV path");
	alpha_cmd->add_option("--alphas", alpha_list, "alpha values, e.g. 1e-4;1e-3");
	alpha_cmd->add_option("--T-list", alpha_T_list, "latencies, e.g. 20;35");
	common(alpha_cmd);
	alpha_cmd->callback([&] {
		action = [&] {
			materialize();
			if (!alpha_data.empty()) cfg.set("data", alpha_data);
			if (!alpha_list.empty()) cfg.set("alphas", alpha_list);
			if (!alpha_T_list.empty()) cfg.set("T_list", alpha_T_list);
			fill_defaults(cfg);
			if (!cfg.has("alphas")) cfg.set("alphas", "1e-4;1e-3");
			if (!cfg.has("T_list")) cfg.set("T_list", "20");
			const DatasetPair data = dataset_from(cfg);
			AlphaCompareOptions opt;
			opt.alphas = parse_doubles(cfg.get_str("alphas", ""), "alphas");
			opt.T_list = parse_sizes(cfg.get_str("T_list", ""), "T_list");
			opt.arch = cfg.get_str("arch", "cnet");
			opt.base = optimizer_from(cfg);
			opt.strategy = NormFactorStrategy::parse(cfg.get_str("strategy", "tcl"));
			opt.measure_time = cfg.get_str("timing", "real") != "none";
			const std::vector<AlphaRecord> records =
			    run_alpha_comparison(data, opt, normalization_from(cfg), cfg.get_u64("classes", 10));
			std::ofstream out(alpha_out);
			if (!out) throw data_error(alpha_out + ": cannot write");
			write_alpha_csv(records, out);
			write_resolved(cfg, alpha_out);
			std::cout << "wrote " << records.size() << " rows to " << alpha_out << "\n";
		};
	});

	// eval ----------------------------------------------------------------
	auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model file on the test set");
	std::string eval_in, eval_data;
	eval_cmd->add_option("--model", eval_in, "model file")->required();
	eval_cmd->add_option("--data", eval_data, "dataset directory");
	common(eval_cmd);
	eval_cmd->callback([&] {
		action = [&] {
			materialize();
			if (!eval_data.empty()) cfg.set("data", eval_data);
			fill_defaults(cfg);
			LoadedModel m = load_model(eval_in);
			if (m.meta.snn) throw usage_error("eval: use simulate for spiking models");
			const DatasetPair data = dataset_from(cfg);
			const double acc = evaluate(m.graph, data.test, normalization_from(cfg));
			std::cout << "ann_acc=" << fmt::pct2(acc * 100.0) << "% (raw " << fmt::raw(acc) << ")\n";
		};
	});

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp& e) {
		return app.exit(e);
	} catch (const CLI::ParseError& e) {
		app.exit(e);
		return 1;
	}
	if (action) action();
	return 0;
}

}  // namespace

int main(int argc, char** argv)
{
	try {
		return run_cli(argc, argv);
	} catch (const csnn::divergence_error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 3;
	} catch (const csnn::data_error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const csnn::usage_error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	} catch (const csnn::error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
}
