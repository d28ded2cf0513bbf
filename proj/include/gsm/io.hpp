#pragma once

#include "gsm/estimate.hpp"
#include "gsm/model.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace gsm {

inline constexpr const char* kSchema = "gsm/1";
inline constexpr const char* kVersion = "0.1.0";

struct CsvTable {
    MatrixXd values;
    std::vector<std::string> header;  // empty when the file had none
};

/// Comma-separated numbers; a first row that does not parse as numbers is
/// taken as the header.
CsvTable read_csv(const std::string& path);

/// Values are written with 17 significant digits so they round-trip exactly.
void write_csv(const std::string& path, const MatrixXd& values, const std::vector<std::string>& header = {});

nlohmann::json matrix_to_json(const MatrixXd& M);
MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const VectorXd& v);

void write_json(const std::string& path, const nlohmann::json& j);

/// "<dir>/<stem>.manifest.json" for an output path "<dir>/<stem>.<ext>".
std::string manifest_path_for(const std::string& output);

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json seeds = nlohmann::json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_time_s = 0.0;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
};

} // namespace gsm
