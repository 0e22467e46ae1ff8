#include "catm/probability_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "catm/error.hpp"

namespace catm {

namespace {

const char* kModule = "cli-driver";

void put(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    out += buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

double number(const std::string& cell) {
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size()) throw Error(kModule, "malformed number '" + cell + "'");
    return v;
}

}  // namespace

void validate_records(const ProbabilitySeries& s) {
    if (s.size() == 0) throw Error(kModule, "empty probability series");
    for (size_t k = 0; k < s.size(); ++k) {
        if (!std::isfinite(s.times[k]) || !std::isfinite(s.dissociation[k]) || !std::isfinite(s.norm[k]))
            throw Error(kModule, "non-finite record at t = " + std::to_string(s.times[k]));
        for (int j = 0; j < s.n_states(); ++j) {
            const double p = s.populations(j, static_cast<Eigen::Index>(k));
            if (!std::isfinite(p) || p < -1e-12)
                throw Error(kModule, "invalid probability for state " + std::to_string(j) +
                                         " at t = " + std::to_string(s.times[k]));
        }
    }
}

std::string format_probabilities(const ProbabilitySeries& s) {
    validate_records(s);
    std::string out = "t";
    for (int j = 0; j < s.n_states(); ++j) out += ",P_" + std::to_string(j);
    out += ",P_diss,norm\n";
    for (size_t k = 0; k < s.size(); ++k) {
        put(out, s.times[k]);
        for (int j = 0; j < s.n_states(); ++j) {
            out += ',';
            put(out, s.populations(j, static_cast<Eigen::Index>(k)));
        }
        out += ',';
        put(out, s.dissociation[k]);
        out += ',';
        put(out, s.norm[k]);
        out += '\n';
    }
    return out;
}

void emit_probabilities(const ProbabilitySeries& series, const std::string& path) {
    const std::string text = format_probabilities(series);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(kModule, "cannot open " + path + " for writing");
    f << text;
    if (!f) throw Error(kModule, "write failed for " + path);
}

ProbabilitySeries parse_probabilities(const std::string& text) {
    std::stringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(kModule, "missing CSV header");
    const std::vector<std::string> header = split(line);
    if (header.size() < 3 || header.front() != "t" || header[header.size() - 2] != "P_diss" ||
        header.back() != "norm")
        throw Error(kModule, "unexpected CSV header");
    const int n = static_cast<int>(header.size()) - 3;
    ProbabilitySeries s;
    std::vector<std::vector<double>> pops;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != header.size()) throw Error(kModule, "ragged CSV row");
        s.times.push_back(number(cells[0]));
        std::vector<double> row;
        for (int j = 0; j < n; ++j) row.push_back(number(cells[1 + j]));
        pops.push_back(row);
        s.dissociation.push_back(number(cells[1 + n]));
        s.norm.push_back(number(cells[2 + n]));
    }
    s.populations.resize(n, static_cast<Eigen::Index>(pops.size()));
    for (size_t k = 0; k < pops.size(); ++k)
        for (int j = 0; j < n; ++j) s.populations(j, static_cast<Eigen::Index>(k)) = pops[k][j];
    return s;
}

ProbabilitySeries read_probabilities(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(kModule, "cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_probabilities(ss.str());
}

}  // namespace catm
