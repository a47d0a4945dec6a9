#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace voices::csv
{

/// Split one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split(std::string_view line);

/// Quote a field when it contains a separator, quote, or leading/trailing space.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Reads all non-empty records; strips a trailing '\r'.
std::vector<std::vector<std::string>> read_file(const std::filesystem::path& path);

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

/// Strict parse: the whole field must be consumed. Accepts nan/inf spellings so callers can
/// reject them with a precise message.
bool parse_double(std::string_view text, double& out);

}  // namespace voices::csv
