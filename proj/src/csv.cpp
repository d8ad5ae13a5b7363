#include "slowlab/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slowlab {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out)
        throw std::runtime_error("cannot write " + path);
    return out;
}

double parse_field(const std::string& s) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw std::runtime_error("csv: bad numeric field '" + s + "'");
    }
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    return fields;
}

}  // namespace

void emit_csv(const TrajectoryRecord& rec, int dim, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "s,t";
    for (int i = 0; i < dim; ++i) out << ",theta_" << i;
    for (int i = 0; i < dim; ++i) out << ",phi_" << i;
    out << ",dist_manifold,loss,tr_hess\n";
    for (const auto& p : rec.points) {
        out << p.s << ',' << format_double(p.t);
        for (int i = 0; i < dim; ++i) out << ',' << format_double(p.theta[i]);
        for (int i = 0; i < dim; ++i)
            out << ',' << (p.phi ? format_double((*p.phi)[i]) : "nan");
        out << ',' << format_double(p.dist_manifold) << ',' << format_double(p.loss) << ','
            << format_double(p.tr_hess) << '\n';
    }
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

TrajectoryRecord parse_csv(const std::string& path, int dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("csv: empty file " + path);
    TrajectoryRecord rec;
    const std::size_t expect = 2 + 2 * static_cast<std::size_t>(dim) + 3;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_line(line);
        if (f.size() != expect)
            throw std::runtime_error("csv: wrong column count in " + path);
        TrajectoryPoint p;
        p.s = std::stol(f[0]);
        p.t = parse_field(f[1]);
        p.theta.resize(dim);
        for (int i = 0; i < dim; ++i) p.theta[i] = parse_field(f[2 + i]);
        Vector phi(dim);
        bool has_phi = true;
        for (int i = 0; i < dim; ++i) {
            phi[i] = parse_field(f[2 + dim + i]);
            if (std::isnan(phi[i])) has_phi = false;
        }
        if (has_phi) p.phi = phi;
        p.dist_manifold = parse_field(f[2 + 2 * dim]);
        p.loss = parse_field(f[3 + 2 * dim]);
        p.tr_hess = parse_field(f[4 + 2 * dim]);
        rec.points.push_back(std::move(p));
    }
    return rec;
}

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    std::ofstream out = open_out(path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("write_table: row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

}  // namespace slowlab
