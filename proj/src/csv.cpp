#include "ppde/csv.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ppde {

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

std::string CsvWriter::num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::invalid_argument("CsvWriter: column mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) text_ += ',';
        text_ += cells[i];
    }
    text_ += '\n';
}

void CsvWriter::row_values(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(num(v));
    row(cells);
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << text_;
}

std::string paths_to_csv(const BrownianBatch& batch) {
    std::vector<std::string> header{"path_id", "k", "t"};
    for (int i = 1; i <= batch.dim(); ++i) header.push_back("x_" + std::to_string(i));
    CsvWriter w(std::move(header));
    for (int m = 0; m < batch.num_paths(); ++m)
        for (int k = 0; k <= batch.grid().steps(); ++k) {
            std::vector<std::string> cells{std::to_string(m), std::to_string(k),
                                           CsvWriter::num(batch.grid().time(k))};
            for (int i = 0; i < batch.dim(); ++i)
                cells.push_back(CsvWriter::num(batch.path(m).value(k, i)));
            w.row(cells);
        }
    return w.text();
}

void write_paths_csv(const BrownianBatch& batch, const std::string& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + file);
    out << paths_to_csv(batch);
}

ParsedPaths read_paths_csv(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty path file");
    int dim = 0;
    {
        std::stringstream hs(line);
        std::string cell;
        int cols = 0;
        while (std::getline(hs, cell, ',')) ++cols;
        dim = cols - 3;
        if (dim < 1) throw std::runtime_error("bad path header");
    }
    std::map<int, std::map<int, std::vector<double>>> rows;
    double t_max = 0.0;
    int k_max = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        const int pid = std::stoi(cells[0]);
        const int k = std::stoi(cells[1]);
        const double t = std::stod(cells[2]);
        std::vector<double> x(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i) x[static_cast<std::size_t>(i)] = std::stod(cells[3 + i]);
        rows[pid][k] = std::move(x);
        if (k > k_max) {
            k_max = k;
            t_max = t;
        }
    }
    if (k_max < 1) throw std::runtime_error("path file has a single node");
    ParsedPaths out;
    out.grid = TimeGrid(t_max, k_max);
    out.dim = dim;
    for (auto& [pid, nodes] : rows) {
        std::vector<double> values(static_cast<std::size_t>(k_max + 1) * dim, 0.0);
        for (auto& [k, x] : nodes)
            for (int i = 0; i < dim; ++i)
                values[static_cast<std::size_t>(k) * dim + i] = x[static_cast<std::size_t>(i)];
        out.paths.push_back(
            DiscretePath::from_values(out.grid, dim, PathFlavor::continuous, std::move(values)));
    }
    return out;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace ppde
