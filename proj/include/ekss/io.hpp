#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ekss/geometry.hpp"
#include "ekss/synth.hpp"

namespace ekss {

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Writes a matrix as CSV: one row per line, comma-separated, no header.
/// Data matrices follow the column-per-point convention (D rows, N columns).
inline void save_matrix_csv(const std::string& path, const Matrix& M) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) out << ',';
            out << detail::format_double(M(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Reads a CSV matrix, validating rectangularity and finiteness.
inline Matrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw std::runtime_error("non-numeric CSV cell in " + path + ": " + cell);
            }
            while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
                ++pos;
            if (pos != cell.size())
                throw std::runtime_error("non-numeric CSV cell in " + path + ": " + cell);
            if (!std::isfinite(v))
                throw std::runtime_error("non-finite CSV entry in " + path);
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged CSV rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty())
        throw std::runtime_error("empty CSV matrix in " + path);
    Matrix M(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return M;
}

/// Labels: one 0-based integer per line.
inline void save_labels_csv(const std::string& path, const Labeling& labels) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (int l : labels) out << l << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Labeling load_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    Labeling labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            labels.push_back(std::stoi(line));
        } catch (const std::exception&) {
            throw std::runtime_error("non-integer label in " + path + ": " + line);
        }
        if (labels.back() < 0) throw std::runtime_error("negative label in " + path);
    }
    if (labels.empty()) throw std::runtime_error("empty label file: " + path);
    return labels;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = rows.empty() ? 0 : rows.front().size();
    Matrix M(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j].get<double>();
    return M;
}

}  // namespace detail

/// Ground-truth record for a generated instance: bases, noise level, masks,
/// and the echoed generator configuration.
inline void save_instance_json(const std::string& path, const ProblemInstance& inst) {
    nlohmann::json j;
    j["config"] = {{"kind", inst.config.kind},
                   {"D", inst.config.D},
                   {"K", inst.config.K},
                   {"dims", inst.config.dims},
                   {"counts", inst.config.counts},
                   {"sigma", inst.config.sigma},
                   {"theta", inst.config.theta},
                   {"missing_s", inst.config.missing_s},
                   {"seed", {{"master_seed", inst.config.seed.master_seed},
                             {"stream_id", inst.config.seed.stream_id}}}};
    j["sigma"] = inst.noise_sigma;
    j["bases"] = nlohmann::json::array();
    for (const Matrix& U : inst.true_bases) j["bases"].push_back(detail::matrix_to_json(U));
    if (inst.missing_mask)
        j["missing_mask"] = *inst.missing_mask;
    else
        j["missing_mask"] = nullptr;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Loads the parts of an instance record needed downstream (bases, sigma,
/// masks, config echo). The data itself lives in data.csv.
inline ProblemInstance load_instance_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    nlohmann::json j;
    in >> j;

    ProblemInstance inst;
    const auto& cfg = j.at("config");
    inst.config.kind = cfg.at("kind").get<std::string>();
    inst.config.D = cfg.at("D").get<int>();
    inst.config.K = cfg.at("K").get<int>();
    inst.config.dims = cfg.at("dims").get<std::vector<int>>();
    inst.config.counts = cfg.at("counts").get<std::vector<int>>();
    inst.config.sigma = cfg.at("sigma").get<double>();
    inst.config.theta = cfg.at("theta").get<double>();
    inst.config.missing_s = cfg.at("missing_s").get<int>();
    inst.config.seed.master_seed = cfg.at("seed").at("master_seed").get<std::uint64_t>();
    inst.config.seed.stream_id = cfg.at("seed").at("stream_id").get<std::uint64_t>();
    inst.noise_sigma = j.at("sigma").get<double>();
    for (const auto& b : j.at("bases")) inst.true_bases.push_back(detail::matrix_from_json(b));
    if (!j.at("missing_mask").is_null())
        inst.missing_mask = j.at("missing_mask").get<std::vector<std::vector<int>>>();
    return inst;
}

}  // namespace ekss
