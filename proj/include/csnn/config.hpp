#ifndef CSNN_CONFIG_HPP
#define CSNN_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "csnn/error.hpp"

namespace csnn {

/// Flat key=value configuration. '#' starts a comment, blank lines are
/// skipped, later assignments win. Keys are kept sorted so the resolved
/// dump (and its hash) is canonical.
struct Config {
	std::map<std::string, std::string> kv;

	static std::string trim(const std::string& s)
	{
		const auto a = s.find_first_not_of(" \t\r\n");
		if (a == std::string::npos) return "";
		const auto b = s.find_last_not_of(" \t\r\n");
		return s.substr(a, b - a + 1);
	}

	void parse_line(const std::string& raw, const std::string& where, std::size_t lineno)
	{
		std::string line = raw;
		const auto hash = line.find('#');
		if (hash != std::string::npos) line = line.substr(0, hash);
		line = trim(line);
		if (line.empty()) return;
		const auto eq = line.find('=');
		if (eq == std::string::npos)
			throw usage_error(where + ":" + std::to_string(lineno) + ": expected key=value, got '" + line +
			                  "'");
		const std::string key = trim(line.substr(0, eq));
		if (key.empty())
			throw usage_error(where + ":" + std::to_string(lineno) + ": empty key");
		kv[key] = trim(line.substr(eq + 1));
	}

	static Config parse_text(const std::string& text, const std::string& where = "<config>")
	{
		Config c;
		std::istringstream in(text);
		std::string line;
		std::size_t lineno = 0;
		while (std::getline(in, line)) c.parse_line(line, where, ++lineno);
		return c;
	}

	static Config parse_file(const std::string& path)
	{
		std::ifstream in(path);
		if (!in) throw usage_error(path + ": cannot open config file");
		std::ostringstream buf;
		buf << in.rdbuf();
		return parse_text(buf.str(), path);
	}

	bool has(const std::string& key) const { return kv.count(key) != 0; }

	void set(const std::string& key, const std::string& value) { kv[key] = value; }

	std::string get_str(const std::string& key, const std::string& fallback) const
	{
		const auto it = kv.find(key);
		return it == kv.end() ? fallback : it->second;
	}

	double get_f64(const std::string& key, double fallback) const
	{
		const auto it = kv.find(key);
		if (it == kv.end()) return fallback;
		try {
			std::size_t pos = 0;
			const double v = std::stod(it->second, &pos);
			if (pos != it->second.size()) throw std::invalid_argument("");
			return v;
		} catch (const std::exception&) {
			throw usage_error("config: key '" + key + "': expected a number, got '" + it->second + "'");
		}
	}

	std::size_t get_u64(const std::string& key, std::size_t fallback) const
	{
		const auto it = kv.find(key);
		if (it == kv.end()) return fallback;
		try {
			if (!it->second.empty() && it->second[0] == '-') throw std::invalid_argument("");
			std::size_t pos = 0;
			const unsigned long long v = std::stoull(it->second, &pos);
			if (pos != it->second.size()) throw std::invalid_argument("");
			return static_cast<std::size_t>(v);
		} catch (const std::exception&) {
			throw usage_error("config: key '" + key + "': expected a non-negative integer, got '" +
			                  it->second + "'");
		}
	}

	bool get_bool(const std::string& key, bool fallback) const
	{
		const auto it = kv.find(key);
		if (it == kv.end()) return fallback;
		if (it->second == "true" || it->second == "1") return true;
		if (it->second == "false" || it->second == "0") return false;
		throw usage_error("config: key '" + key + "': expected true/false, got '" + it->second + "'");
	}

	/// Canonical dump: sorted key=value lines.
	std::string resolved_text() const
	{
		std::string out;
		for (const auto& [k, v] : kv) {
			out += k;
			out += '=';
			out += v;
			out += '\n';
		}
		return out;
	}

	/// FNV-1a over the canonical dump.
	std::uint64_t hash() const
	{
		std::uint64_t h = 14695981039346656037ull;
		for (char c : resolved_text()) {
			h ^= static_cast<unsigned char>(c);
			h *= 1099511628211ull;
		}
		return h;
	}

	void write_file(const std::string& path) const
	{
		std::ofstream out(path);
		if (!out) throw data_error(path + ": cannot write resolved config");
		out << resolved_text();
	}
};

}  // namespace csnn

#endif
