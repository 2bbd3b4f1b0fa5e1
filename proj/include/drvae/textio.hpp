#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace drvae {

// Shortest text form that parses back to the identical double.
std::string format_double(double v);

// Strict full-token parse; context names the file location on failure.
double parse_double(std::string_view token, const std::string& context);
long parse_long(std::string_view token, const std::string& context);

// Write via a temp file in the same directory, then rename into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace drvae
