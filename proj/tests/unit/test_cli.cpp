#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using Catch::Matchers::ContainsSubstring;

namespace {

const std::string cli = CSNN_CLI_PATH;
const std::string tmp = "/tmp/csnn_cli_" + std::to_string(::getpid());

/// Tiny fast run: one epoch over a small synthetic split.
const std::string tiny =
    " --set dataset=synth --set synth_train=96 --set synth_test=32 --set synth_noise=0.05"
    " --set \"arch=dense:16 relu clip dense:10\" --set epochs=1 --set schedule=none"
    " --set eta=0.05";

int run(const std::string& args, const std::string& log = "/dev/null")
{
	const std::string cmd = cli + " " + args + " >" + log + " 2>&1";
	const int st = std::system(cmd.c_str());
	return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const std::string& path)
{
	std::ifstream in(path, std::ios::binary);
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

bool exists(const std::string& path) { return std::ifstream(path).good(); }

}  // namespace

TEST_CASE("cli end-to-end pipeline") {
	const std::string model = tmp + "_m.csnn";
	const std::string snn = tmp + "_s.csnn";
	const std::string log = tmp + "_out.txt";

	REQUIRE(run("train --out " + model + tiny) == 0);
	CHECK(exists(model));
	CHECK(exists(model + ".config"));  // resolved run state next to the output

	CHECK(run("eval --model " + model + tiny, log) == 0);
	CHECK_THAT(slurp(log), ContainsSubstring("ann_acc="));

	REQUIRE(run("convert --model " + model + " --out " + snn + " --strategy tcl" + tiny, log) == 0);
	CHECK_THAT(slurp(log), ContainsSubstring("norm factors"));
	CHECK(exists(snn));

	CHECK(run("simulate --model " + snn + " --T 10" + tiny, log) == 0);
	CHECK_THAT(slurp(log), ContainsSubstring("snn_acc="));

	// single-sample mode prints the output spike counts
	CHECK(run("simulate --model " + snn + " --T 10 --index 0" + tiny, log) == 0);
	CHECK_THAT(slurp(log), ContainsSubstring("output counts"));

	std::remove(model.c_str());
	std::remove((model + ".config").c_str());
	std::remove(snn.c_str());
	std::remove((snn + ".config").c_str());
	std::remove(log.c_str());
}

TEST_CASE("cli sweep is reproducible without timing") {
	const std::string model = tmp + "_sw.csnn";
	REQUIRE(run("train --out " + model + tiny) == 0);

	const std::string c1 = tmp + "_1.csv", c2 = tmp + "_2.csv";
	const std::string sweep_args = " --T-list \"5;10\" --set timing=none" + tiny;
	REQUIRE(run("sweep --model " + model + " --out " + c1 + sweep_args) == 0);
	REQUIRE(run("sweep --model " + model + " --out " + c2 + sweep_args) == 0);
	const std::string a = slurp(c1), b = slurp(c2);
	CHECK(!a.empty());
	CHECK(a == b);
	CHECK_THAT(a, ContainsSubstring("strategy,T,"));

	std::remove(model.c_str());
	std::remove((model + ".config").c_str());
	std::remove(c1.c_str());
	std::remove((c1 + ".config").c_str());
	std::remove(c2.c_str());
	std::remove((c2 + ".config").c_str());
}

TEST_CASE("cli exit codes distinguish failure classes") {
	// 1: bad usage
	CHECK(run("") == 1);                        // missing subcommand
	CHECK(run("--help") == 0);
	CHECK(run("frobnicate") == 1);              // unknown subcommand
	const std::string model = tmp + "_e.csnn";
	REQUIRE(run("train --out " + model + tiny) == 0);
	CHECK(run("convert --model " + model + " --strategy median" + tiny) == 1);
	CHECK(run("simulate --model " + model + " --T 10" + tiny) == 2);  // not converted yet
	CHECK(run("eval --model /tmp/no_such_model_4321.csnn" + tiny) == 2);

	// 3: numerical divergence (linear net so nothing caps the blow-up)
	CHECK(run("train --out " + tmp + "_div.csnn" + tiny +
	          " --set \"arch=dense:16 dense:10\" --set eta=1e300 --set epochs=2") == 3);

	std::remove(model.c_str());
	std::remove((model + ".config").c_str());
	std::remove((tmp + "_div.csnn").c_str());
	std::remove((tmp + "_div.csnn.config").c_str());
}

TEST_CASE("cli reads a config file with overrides winning") {
	const std::string cfg_path = tmp + "_run.cfg";
	{
		std::ofstream cfg(cfg_path);
		cfg << "dataset=synth\nsynth_train=96\nsynth_test=32\nsynth_noise=0.05\n"
		    << "arch=dense:16 relu clip dense:10\nepochs=1\nschedule=none\neta=0.05\n";
	}
	const std::string model = tmp + "_cfg.csnn";
	REQUIRE(run("train --out " + model + " --config " + cfg_path + " --set epochs=2") == 0);
	// the resolved sidecar records the winning value
	CHECK_THAT(slurp(model + ".config"), ContainsSubstring("epochs=2"));

	std::remove(cfg_path.c_str());
	std::remove(model.c_str());
	std::remove((model + ".config").c_str());
}
