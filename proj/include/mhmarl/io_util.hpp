#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mhmarl {

// Writes `contents` to `path.tmp` and renames it into place, so readers never
// observe a half-written file.
void write_file_atomically(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
// Strict: the whole field must be a number. Throws std::invalid_argument.
double parse_double(std::string_view text);

}  // namespace mhmarl
