#ifndef CSNN_ERROR_HPP
#define CSNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace csnn {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
	explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad arguments, malformed specs, invalid configuration. CLI exit code 1.
class usage_error : public error {
public:
	explicit usage_error(const std::string& msg) : error(msg) {}
};

/// Malformed or inconsistent data files. CLI exit code 2.
class data_error : public error {
public:
	explicit data_error(const std::string& msg) : error(msg) {}
};

/// Non-finite values during training. CLI exit code 3.
class divergence_error : public error {
public:
	explicit divergence_error(const std::string& msg) : error(msg), epoch(0), step(0) {}
	divergence_error(const std::string& msg, std::size_t epoch, std::size_t step)
	    : error(msg + " (epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ")"),
	      epoch(epoch),
	      step(step)
	{
	}
	std::size_t epoch;
	std::size_t step;
};

}  // namespace csnn

#endif
