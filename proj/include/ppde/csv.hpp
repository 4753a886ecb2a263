#pragma once

#include <string>
#include <vector>

#include "ppde/brownian.hpp"
#include "ppde/path.hpp"

namespace ppde {

// Small deterministic CSV writer: fixed %.17g rendering so identical runs
// produce byte-identical files.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& cells);
    void row_values(const std::vector<double>& values);
    const std::string& text() const { return text_; }
    void write(const std::string& path) const;
    static std::string num(double v);

private:
    std::size_t columns_;
    std::string text_;
};

// Path batch file: header path_id,k,t,x_1..x_d, one row per node, ordered by
// (path_id, k).
std::string paths_to_csv(const BrownianBatch& batch);
void write_paths_csv(const BrownianBatch& batch, const std::string& file);

struct ParsedPaths {
    TimeGrid grid{1.0, 1};
    int dim = 1;
    std::vector<DiscretePath> paths;
};
ParsedPaths read_paths_csv(const std::string& file);

std::uint64_t fnv1a(const std::string& text);

}  // namespace ppde
