#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prizegrowth {

// CLI exit-code mapping: InputError -> 2, InfeasibleError -> 3, anything else -> 4.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// 64-bit FNV-1a. Used for config/spec fingerprints in manifests, not security.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a(const std::string& s);
std::string hash_hex(std::uint64_t h);

// Shortest text form that round-trips a double through strtod.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);

// Minimal CSV: comma-separated, no quoting, \r tolerated, blank lines skipped.
std::vector<std::string> split_csv_line(const std::string& line);
double parse_number(const std::string& s, const std::string& where);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // each checked to header width
};

// `origin` only labels error messages (file name or artifact name).
CsvTable parse_csv(const std::string& text, const std::string& origin);

// Write-temp-rename so consumers never observe a partial file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

// Runs fn(i) for i in [0, n). Falls back to a serial loop when threads <= 1.
// Tasks must be independent; results land in caller-owned slots, so the
// schedule does not affect output.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace prizegrowth
