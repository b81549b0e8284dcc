#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace regimes::cli {

/// Problems with user input (files, columns, flags). Mapped to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Transform { none, log_diff_pct };

Transform parse_transform(const std::string& s);
std::string to_string(Transform t);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// RFC 4180: quoted fields, doubled quotes, embedded separators and line breaks, CRLF.
CsvTable parse_csv(const std::string& text);

struct DataSet {
    std::vector<double> values;
    std::vector<std::string> timestamps;  ///< empty when the file has no time column
    std::string source_path;
    std::string column;
    Transform transform = Transform::none;
    std::uint64_t digest = 0;  ///< FNV-1a of the raw file bytes
};

inline constexpr std::size_t kMinLength = 10;

/// Reads `column` (or the first all-numeric column when empty) and applies the
/// transform. A column named date, time, timestamp, quarter or period supplies timestamps.
DataSet load_dataset(const std::string& path, const std::string& column, Transform transform);

std::uint64_t fnv1a64(const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace regimes::cli
