#include "modalid/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

#include "modalid/error.hpp"

namespace modalid {
namespace {

constexpr double kGridTolerance = 1e-9;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ParseError("invalid number '" + std::string(field) + "'", line);
    }
    return v;
}

}  // namespace

std::string format_sig(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

Record read_record_csv(std::istream& in, std::optional<double> sample_rate) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty file, header row required", 1);
    ++line_no;

    const auto header = split(line);
    int time_col = -1, force_col = -1, accel_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "time_s") time_col = static_cast<int>(c);
        else if (header[c] == "force_n") force_col = static_cast<int>(c);
        else if (header[c] == "accel") accel_col = static_cast<int>(c);
        else throw ParseError("unknown column '" + std::string(header[c]) + "'", line_no);
    }
    if (time_col < 0 || accel_col < 0) {
        throw ParseError("header must name time_s and accel columns", line_no);
    }

    std::vector<double> t, f, a;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        t.push_back(parse_double(fields[static_cast<std::size_t>(time_col)], line_no));
        a.push_back(parse_double(fields[static_cast<std::size_t>(accel_col)], line_no));
        if (force_col >= 0) f.push_back(parse_double(fields[static_cast<std::size_t>(force_col)], line_no));
    }
    if (t.size() < 2) throw ParseError("need at least two samples", line_no);

    double dt = 0.0;
    if (sample_rate) {
        if (!(*sample_rate > 0.0)) throw ParseError("sample rate override must be positive", 0);
        dt = 1.0 / *sample_rate;
    } else {
        dt = t[1] - t[0];
        if (!(dt > 0.0)) throw ParseError("time stamps must increase", 3);
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double expected = t[0] + static_cast<double>(i) * dt;
        const double slack = kGridTolerance + 4e-16 * std::abs(expected);
        if (std::abs(t[i] - expected) > slack) {
            throw ParseError("non-uniform sampling at t = " + format_sig(t[i], 12), i + 2);
        }
    }
    const double fs = sample_rate ? *sample_rate : 1.0 / dt;

    Record rec;
    rec.accel = TimeSeries(std::move(a), fs, "accel", t[0]);
    if (force_col >= 0) rec.force = TimeSeries(std::move(f), fs, "force_n", t[0]);
    return rec;
}

Record read_record_csv(const std::string& path, std::optional<double> sample_rate) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'", 0);
    return read_record_csv(in, sample_rate);
}

void write_record_csv(std::ostream& out, const Record& rec) {
    const bool with_force = rec.force.has_value();
    out << (with_force ? "time_s,force_n,accel\n" : "time_s,accel\n");
    char buf[48];
    for (std::size_t i = 0; i < rec.accel.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9f", rec.accel.time_at(i));
        out << buf << ',';
        if (with_force) out << format_sig(rec.force->samples[i]) << ',';
        out << format_sig(rec.accel.samples[i]) << '\n';
    }
}

void write_record_csv(const std::string& path, const Record& rec) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    write_record_csv(out, rec);
}

}  // namespace modalid
