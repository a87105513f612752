#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcam {

// Base of every error thrown by the library.
struct error : std::runtime_error {
	using std::runtime_error::runtime_error;
};

struct dimension_error : error {
	using error::error;
};

struct invalid_architecture : error {
	using error::error;
};

struct invalid_input : error {
	using error::error;
};

struct unsupported_error : error {
	using error::error;
};

// Malformed or unsupported file content. offset is the byte position at which
// the reader gave up.
struct format_error : error {
	format_error(const std::string &what, std::size_t offset)
	    : error(what + " (at byte " + std::to_string(offset) + ")"),
	      offset(offset)
	{
	}
	std::size_t offset;
};

struct io_error : error {
	io_error(const std::string &what, std::string path)
	    : error(what + ": " + path), path(std::move(path))
	{
	}
	std::string path;
};

struct config_error : error {
	config_error(const std::string &what, std::string field)
	    : error("config field '" + field + "': " + what), field(std::move(field))
	{
	}
	std::string field;
};

struct oov_error : error {
	explicit oov_error(std::string word)
	    : error("out-of-vocabulary word '" + word + "'"), word(std::move(word))
	{
	}
	std::string word;
};

struct caption_length_error : error {
	using error::error;
};

}  // namespace pcam
