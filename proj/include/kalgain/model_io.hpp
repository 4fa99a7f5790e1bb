#pragma once

// Flat-file formats: system models as JSON (keys A, H, Q, R, P0, m0 with
// row-major nested arrays) and trajectories as CSV with header t,y_1..y_m
// (state columns appended in oracle mode).

#include <nlohmann/json.hpp>

#include <cstdio>
#include <ostream>
#include <string>

#include "kalgain/errors.hpp"
#include "kalgain/sysmodel.hpp"

namespace kalgain {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Matrix matrix_from_json(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ConfigError("model." + field + ": expected a nested array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw ConfigError("model." + field + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
    }
    return M;
}

inline Vector vector_from_json(const json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError("model." + field + ": expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

inline json model_to_json(const SystemModel& model) {
    return json{{"A", matrix_to_json(model.A)},   {"H", matrix_to_json(model.H)},
                {"Q", matrix_to_json(model.Q)},   {"R", matrix_to_json(model.R)},
                {"P0", matrix_to_json(model.P0)}, {"m0", vector_to_json(model.m0)}};
}

inline SystemModel model_from_json(const json& j) {
    for (const char* key : {"A", "H", "Q", "R", "P0", "m0"})
        if (!j.contains(key)) throw ConfigError(std::string("model.") + key + ": missing");
    SystemModel model;
    model.A = matrix_from_json(j["A"], "A");
    model.H = matrix_from_json(j["H"], "H");
    model.Q = matrix_from_json(j["Q"], "Q");
    model.R = matrix_from_json(j["R"], "R");
    model.P0 = matrix_from_json(j["P0"], "P0");
    model.m0 = vector_from_json(j["m0"], "m0");
    if (!validate(model).dims_consistent)
        throw ConfigError("model: inconsistent matrix dimensions");
    return model;
}

/// Fixed 12-significant-digit formatting so reruns produce byte-identical files.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline void trajectory_to_csv(const Trajectory& traj, std::ostream& os) {
    const Eigen::Index m = traj.measurements.empty() ? 0 : traj.measurements.front().size();
    const bool oracle = traj.states.has_value();
    const Eigen::Index n = oracle && !traj.states->empty() ? traj.states->front().size() : 0;
    os << "t";
    for (Eigen::Index j = 0; j < m; ++j) os << ",y_" << (j + 1);
    if (oracle)
        for (Eigen::Index j = 0; j < n; ++j) os << ",x_" << (j + 1);
    os << "\n";
    for (size_t t = 0; t < traj.measurements.size(); ++t) {
        os << t;
        for (Eigen::Index j = 0; j < m; ++j)
            os << "," << format_double(traj.measurements[t](j));
        if (oracle)
            for (Eigen::Index j = 0; j < n; ++j)
                os << "," << format_double((*traj.states)[t](j));
        os << "\n";
    }
}

}  // namespace kalgain
