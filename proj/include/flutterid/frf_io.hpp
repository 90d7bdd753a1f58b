#pragma once

// Text FRF files:
//
//   # frf kind=<receptance|mobility|accelerance> channels=<p>
//   f_hz, re_ch1, im_ch1, ..., re_chp, im_chp
//
// Numbers are written in shortest round-trip form, so store -> load is
// bit-identical.

#include "flutterid/frf.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace flutterid {

struct FrfFormatOptions {
    char delimiter = ',';
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view token, std::size_t line_no)
{
    token = trim(token);
    double value = 0.0;
    const auto* begin = token.data();
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || token.empty()) {
        throw ValidationError("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(token) + "'");
    }
    if (!std::isfinite(value)) throw ValidationError("line " + std::to_string(line_no) + ": NaN entries are not allowed");
    return value;
}

inline void append_double(std::string& out, double value)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    out.append(buf, ptr);
}

struct FrfHeader {
    FrfKind kind = FrfKind::receptance;
    Eigen::Index channels = 0;
};

inline FrfHeader parse_header(const std::string& line)
{
    std::istringstream in(line);
    std::string hash, tag;
    in >> hash >> tag;
    if (hash != "#" || tag != "frf") throw ValidationError("malformed header: expected '# frf kind=... channels=...'");
    FrfHeader header;
    bool have_kind = false;
    bool have_channels = false;
    std::string field;
    while (in >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ValidationError("malformed header field '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "kind") {
            try {
                header.kind = frf_kind_from_string(value);
            } catch (const ValidationError&) {
                throw ValidationError("malformed header: unknown kind '" + value + "'");
            }
            have_kind = true;
        } else if (key == "channels") {
            int p = 0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), p);
            if (ec != std::errc() || ptr != value.data() + value.size() || p < 1) {
                throw ValidationError("malformed header: bad channel count '" + value + "'");
            }
            header.channels = p;
            have_channels = true;
        } else {
            throw ValidationError("malformed header: unknown key '" + key + "'");
        }
    }
    if (!have_kind || !have_channels) throw ValidationError("malformed header: kind and channels are required");
    return header;
}

} // namespace detail

inline FrfDataset parse_frf(std::istream& in, const FrfFormatOptions& options = {})
{
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("malformed header: empty file");
    const detail::FrfHeader header = detail::parse_header(line);
    const auto p = header.channels;

    std::vector<double> hz;
    std::vector<std::vector<cplx>> columns;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::trim(line);
        if (row.empty()) continue;
        std::vector<double> values;
        std::size_t start = 0;
        while (true) {
            const auto pos = row.find(options.delimiter, start);
            values.push_back(detail::parse_double(row.substr(start, pos - start), line_no));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        if (values.size() != static_cast<std::size_t>(1 + 2 * p)) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(1 + 2 * p) +
                                  " fields, found " + std::to_string(values.size()));
        }
        if (!hz.empty() && values[0] <= hz.back()) throw ValidationError("non-monotonic grid");
        hz.push_back(values[0]);
        std::vector<cplx> col(static_cast<std::size_t>(p));
        for (Eigen::Index c = 0; c < p; ++c) {
            col[static_cast<std::size_t>(c)] = {values[static_cast<std::size_t>(1 + 2 * c)],
                                                values[static_cast<std::size_t>(2 + 2 * c)]};
        }
        columns.push_back(std::move(col));
    }
    Eigen::MatrixXcd h(p, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        for (Eigen::Index c = 0; c < p; ++c) h(c, static_cast<Eigen::Index>(j)) = columns[j][static_cast<std::size_t>(c)];
    }
    return FrfDataset(FrequencyGrid(std::move(hz)), std::move(h), header.kind);
}

inline std::string format_frf(const FrfDataset& data, const FrfFormatOptions& options = {})
{
    std::string out = "# frf kind=" + to_string(data.kind) + " channels=" + std::to_string(data.channels()) + "\n";
    for (Eigen::Index j = 0; j < data.bins(); ++j) {
        detail::append_double(out, data.grid.hz(static_cast<std::size_t>(j)));
        for (Eigen::Index c = 0; c < data.channels(); ++c) {
            out.push_back(options.delimiter);
            out.push_back(' ');
            detail::append_double(out, data.responses(c, j).real());
            out.push_back(options.delimiter);
            out.push_back(' ');
            detail::append_double(out, data.responses(c, j).imag());
        }
        out.push_back('\n');
    }
    return out;
}

inline FrfDataset load_frf(const std::filesystem::path& path, const FrfFormatOptions& options = {})
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open FRF file '" + path.string() + "'");
    return parse_frf(in, options);
}

inline void store_frf(const FrfDataset& data, const std::filesystem::path& path, const FrfFormatOptions& options = {})
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write FRF file '" + path.string() + "'");
    out << format_frf(data, options);
    if (!out) throw ValidationError("failed writing FRF file '" + path.string() + "'");
}

} // namespace flutterid
