#include "delayldp/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace delayldp {

namespace {

void write_header(std::ostream& out, std::size_t dim) {
    out << 't';
    for (std::size_t c = 0; c < dim; ++c) out << ",v" << c;
    out << '\n';
}

void write_number(std::ostream& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
}

struct Table {
    std::vector<double> times;
    std::vector<double> values;  // row-major
    std::size_t dim = 0;
};

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("csv: cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("csv: '" + path.string() + "' is empty");
    Table tbl;
    {
        std::stringstream header(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(header, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            const std::string want = cols == 0 ? "t" : "v" + std::to_string(cols - 1);
            if (cell != want) throw ParseError("csv: '" + path.string() + "' header column " + std::to_string(cols) +
                                               " is '" + cell + "', expected '" + want + "'");
            ++cols;
        }
        if (cols < 2) throw ParseError("csv: '" + path.string() + "' needs columns t,v0,...");
        tbl.dim = cols - 1;
    }
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            const char* first = cell.data();
            while (*first == ' ') ++first;
            auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
            if (ec != std::errc{}) {
                if (cell.find("inf") != std::string::npos || cell.find("nan") != std::string::npos) {
                    v = std::stod(cell);
                } else {
                    throw ParseError("csv: '" + path.string() + "' row " + std::to_string(row) + ": bad number '" +
                                     cell + "'");
                }
            }
            (col == 0 ? tbl.times : tbl.values).push_back(v);
            ++col;
        }
        if (col != tbl.dim + 1) {
            throw ParseError("csv: '" + path.string() + "' row " + std::to_string(row) + " has " + std::to_string(col) +
                             " columns, expected " + std::to_string(tbl.dim + 1));
        }
    }
    return tbl;
}

}  // namespace

void write_csv(std::ostream& out, const Trajectory& traj) {
    write_header(out, traj.dim());
    const auto& g = traj.grid();
    for (auto i = -static_cast<std::ptrdiff_t>(g.n_history); i <= static_cast<std::ptrdiff_t>(g.n_steps); ++i) {
        write_number(out, g.time(i));
        for (double v : traj.node(i)) {
            out << ',';
            write_number(out, v);
        }
        out << '\n';
    }
}

void write_csv(std::ostream& out, const Control& ctrl) {
    write_header(out, ctrl.dim());
    const auto& g = ctrl.grid();
    for (std::size_t k = 0; k < g.n_steps; ++k) {
        write_number(out, g.time(static_cast<std::ptrdiff_t>(k)));
        for (double v : ctrl.at(k)) {
            out << ',';
            write_number(out, v);
        }
        out << '\n';
    }
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    auto tbl = read_table(path);
    if (tbl.times.size() < 3) throw ParseError("csv: '" + path.string() + "' needs at least 3 rows");
    const double t0 = tbl.times.front();
    const double t1 = tbl.times.back();
    const double h = (t1 - t0) / static_cast<double>(tbl.times.size() - 1);
    const TimeGrid grid = make_grid(t1, h, -t0);
    if (grid.total_nodes() != tbl.times.size()) throw ParseError("csv: '" + path.string() + "' row count does not match grid");
    for (std::size_t k = 0; k < tbl.times.size(); ++k) {
        const double expect = grid.time(static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(grid.n_history));
        if (std::abs(tbl.times[k] - expect) > 1e-6 * h) {
            throw ParseError("csv: '" + path.string() + "' time column is not uniform at row " + std::to_string(k + 2));
        }
    }
    return {grid, tbl.dim, std::move(tbl.values), PathOrigin::skeleton};
}

Control read_control_csv(const std::filesystem::path& path, const TimeGrid& grid) {
    auto tbl = read_table(path);
    if (tbl.times.size() != grid.n_steps) {
        throw ParseError("csv: control '" + path.string() + "' has " + std::to_string(tbl.times.size()) +
                         " rows, grid has " + std::to_string(grid.n_steps) + " steps");
    }
    for (std::size_t k = 0; k < tbl.times.size(); ++k) {
        if (std::abs(tbl.times[k] - grid.time(static_cast<std::ptrdiff_t>(k))) > 1e-6 * grid.step) {
            throw ParseError("csv: control '" + path.string() + "' row " + std::to_string(k + 2) + " is off-grid");
        }
    }
    return {grid, tbl.dim, std::move(tbl.values)};
}

InitialSegment read_initial_segment_csv(const std::filesystem::path& path, const TimeGrid& grid) {
    auto tbl = read_table(path);
    const auto n = tbl.times.size();
    if (n == 0) throw ParseError("csv: initial segment '" + path.string() + "' has no rows");
    const double slack = 1e-9 * std::max(1.0, grid.tau);
    if (tbl.times.front() > -grid.tau + slack || tbl.times.back() < -slack) {
        if (n != 1) throw ParseError("csv: initial segment '" + path.string() + "' must cover [-tau, 0]");
    }
    const std::size_t d = tbl.dim;
    return InitialSegment::from_function(grid, d, [&](double t, std::span<double> out) {
        if (n == 1) {
            for (std::size_t c = 0; c < d; ++c) out[c] = tbl.values[c];
            return;
        }
        std::size_t j = 0;
        while (j + 2 < n && tbl.times[j + 1] < t) ++j;
        const double w = std::clamp((t - tbl.times[j]) / (tbl.times[j + 1] - tbl.times[j]), 0.0, 1.0);
        for (std::size_t c = 0; c < d; ++c) {
            const double a = tbl.values[j * d + c];
            const double b = tbl.values[(j + 1) * d + c];
            out[c] = a + w * (b - a);
        }
    });
}

}  // namespace delayldp
