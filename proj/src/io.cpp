#include "gsm/io.hpp"

#include "gsm/errors.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gsm {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

} // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DomainError("cannot read CSV file " + path);
    CsvTable t;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_fields(line);
        std::vector<double> row(fields.size());
        bool numeric = true;
        for (std::size_t k = 0; k < fields.size() && numeric; ++k) numeric = parse_double(fields[k], row[k]);
        if (!numeric) {
            if (rows.empty() && t.header.empty()) {
                t.header = fields;
                width = fields.size();
                continue;
            }
            throw DomainError(path + ":" + std::to_string(lineno) + ": non-numeric field");
        }
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw DomainError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                              " fields, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DomainError("CSV file " + path + " has no data rows");
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return t;
}

void write_csv(const std::string& path, const MatrixXd& values, const std::vector<std::string>& header) {
    std::ofstream os(path);
    if (!os) throw DomainError("cannot write " + path);
    if (!header.empty()) {
        for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
        os << '\n';
    }
    char buf[40];
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", values(i, j));
            if (j) os << ',';
            os << buf;
        }
        os << '\n';
    }
    if (!os) throw NumericError("failed while writing " + path);
}

nlohmann::json matrix_to_json(const MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto n = static_cast<Index>(j.size());
    const Index m = n ? static_cast<Index>(j.at(0).size()) : 0;
    MatrixXd M(n, m);
    for (Index r = 0; r < n; ++r) {
        if (static_cast<Index>(j.at(static_cast<std::size_t>(r)).size()) != m) throw DomainError("ragged matrix in JSON");
        for (Index c = 0; c < m; ++c) M(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    }
    return M;
}

nlohmann::json vector_to_json(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw DomainError("cannot write " + path);
    os << j.dump(2) << '\n';
}

std::string manifest_path_for(const std::string& output) {
    std::filesystem::path p(output);
    std::string stem = p.filename().string();
    const auto dot = stem.find('.');
    if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
    return (p.parent_path() / (stem + ".manifest.json")).string();
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["schema"] = kSchema;
    j["software"] = {{"name", "gsm"}, {"version", kVersion}};
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_time_s"] = wall_time_s;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

} // namespace gsm
