#ifndef RSMC_IO_HPP
#define RSMC_IO_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rsmc/core.hpp"

namespace rsmc {

// malformed or inconsistent input data (CLI exit code 3)
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace and CR
        size_t a = cell.find_first_not_of(" \t\r");
        size_t b = cell.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

} // namespace detail

// Parse a case-count CSV with header `date,local_cases[,imported_cases]`.
// Dates must be consecutive calendar days; blank local_cases mark missing
// days; an absent imported column defaults to zeros.
inline TimeSeriesData ingest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open data file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw data_error("empty data file: " + path);
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "date" || header[1] != "local_cases") {
        throw data_error("expected header 'date,local_cases[,imported_cases]' in " +
                         path);
    }
    const bool has_imports = header.size() >= 3 && header[2] == "imported_cases";

    TimeSeriesData data;
    int line_no = 1;
    bool first = true;
    Date expected{};
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() < 2) {
            throw data_error(path + ":" + std::to_string(line_no) + ": too few columns");
        }
        Date d;
        try {
            d = parse_date(cells[0]);
        } catch (const std::invalid_argument& e) {
            throw data_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (first) {
            data.start_date = d;
            first = false;
        } else if (d != expected) {
            if (d > expected) {
                std::string missing;
                for (Date g = expected; g < d; g += std::chrono::days{1}) {
                    if (!missing.empty()) missing += ", ";
                    missing += format_date(g);
                }
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": gap in dates, missing: " + missing);
            }
            throw data_error(path + ":" + std::to_string(line_no) +
                             ": dates out of order");
        }
        expected = d + std::chrono::days{1};

        if (cells[1].empty()) {
            data.local_cases.emplace_back(std::nullopt);
        } else {
            long v = 0;
            try {
                v = std::stol(cells[1]);
            } catch (...) {
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": invalid local_cases value '" + cells[1] + "'");
            }
            if (v < 0) {
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": negative local_cases");
            }
            data.local_cases.emplace_back(v);
        }
        long imp = 0;
        if (has_imports && cells.size() >= 3 && !cells[2].empty()) {
            try {
                imp = std::stol(cells[2]);
            } catch (...) {
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": invalid imported_cases value '" + cells[2] + "'");
            }
            if (imp < 0) {
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": negative imported_cases");
            }
        }
        data.imported_cases.push_back(imp);
    }
    if (data.local_cases.empty()) throw data_error("no data rows in " + path);
    return data;
}

inline void write_timeseries(const std::string& path, const TimeSeriesData& data) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write: " + path);
    out << "date,local_cases,imported_cases\n";
    for (int t = 1; t <= data.length(); ++t) {
        out << format_date(data.date(t)) << ',';
        if (!data.missing(t)) out << *data.local_cases[size_t(t - 1)];
        out << ',' << data.imported(t) << '\n';
    }
}

} // namespace rsmc

#endif
