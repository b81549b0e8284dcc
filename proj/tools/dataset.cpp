#include "dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace regimes::cli {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool is_time_name(const std::string& name) {
    const std::string n = lower(trim(name));
    return n == "date" || n == "time" || n == "timestamp" || n == "quarter" || n == "period";
}

}  // namespace

Transform parse_transform(const std::string& s) {
    if (s == "none") return Transform::none;
    if (s == "log_diff_pct") return Transform::log_diff_pct;
    throw InputError("unknown transform '" + s + "' (expected none or log_diff_pct)");
}

std::string to_string(Transform t) { return t == Transform::none ? "none" : "log_diff_pct"; }

CsvTable parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, field_started = false;
    std::size_t line = 1;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !trim(field).empty())
                    throw InputError("line " + std::to_string(line) + ": stray quote inside an unquoted field");
                field.clear();
                quoted = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_record();
                ++line;
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (quoted) throw InputError("unterminated quoted field");
    if (field_started || !record.empty()) end_record();
    if (records.empty()) throw InputError("CSV file is empty");

    CsvTable t;
    t.header = std::move(records.front());
    for (auto& h : t.header) h = trim(h);
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size())
            throw InputError("CSV record " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                             " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DataSet load_dataset(const std::string& path, const std::string& column, Transform transform) {
    const std::string raw = read_file(path);
    const CsvTable t = parse_csv(raw);
    DataSet d;
    d.source_path = path;
    d.transform = transform;
    d.digest = fnv1a64(raw);

    auto available = [&] {
        std::string s;
        for (std::size_t i = 0; i < t.header.size(); ++i) s += (i ? ", " : "") + t.header[i];
        return s;
    };
    std::optional<std::size_t> col;
    if (!column.empty()) {
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == column) col = i;
        if (!col) throw InputError("column '" + column + "' not found; available columns: " + available());
    } else {
        for (std::size_t i = 0; i < t.header.size() && !col; ++i) {
            if (is_time_name(t.header[i])) continue;
            const bool numeric = std::all_of(t.rows.begin(), t.rows.end(),
                                             [&](const auto& r) { return parse_number(r[i]).has_value(); });
            if (numeric && !t.rows.empty()) col = i;
        }
        if (!col) throw InputError("no numeric column found; available columns: " + available());
    }
    d.column = t.header[*col];

    std::optional<std::size_t> time_col;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (i != *col && is_time_name(t.header[i])) time_col = i;

    std::vector<double> v;
    std::vector<std::string> ts;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto x = parse_number(t.rows[r][*col]);
        if (!x)
            throw InputError("row " + std::to_string(r + 2) + ", column '" + d.column + "': '" + t.rows[r][*col] +
                             "' is not a finite number");
        v.push_back(*x);
        if (time_col) ts.push_back(trim(t.rows[r][*time_col]));
    }
    if (transform == Transform::log_diff_pct) {
        for (std::size_t r = 0; r < v.size(); ++r)
            if (!(v[r] > 0.0))
                throw InputError("log_diff_pct needs positive values (row " + std::to_string(r + 2) + ")");
        std::vector<double> g;
        for (std::size_t r = 1; r < v.size(); ++r) g.push_back(100.0 * (std::log(v[r]) - std::log(v[r - 1])));
        v = std::move(g);
        if (!ts.empty()) ts.erase(ts.begin());
    }
    if (v.size() < kMinLength)
        throw InputError("series has " + std::to_string(v.size()) + " values; at least " +
                         std::to_string(kMinLength) + " are needed");
    d.values = std::move(v);
    d.timestamps = std::move(ts);
    return d;
}

}  // namespace regimes::cli
