#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace mrta {

// Writes via a temp file in the target directory, then renames into place.
// Nothing is left at `path` if the writer throws.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
std::uint64_t file_hash(const std::filesystem::path& path);

// Round-trip-exact decimal form for CSV fields.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace mrta
