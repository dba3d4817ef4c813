// io.hpp: coefficient files, boundary data and table output.

#pragma once

#include "dhs/system.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include <json.hpp>

namespace dhs {

using json = nlohmann::json;

// ------------------------------ parsing --------------------------------------

// A complex entry: number, [re, im] or {"re": .., "im": ..}.
inline cplx parse_complex(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    if (j.is_object() && j.contains("re")) return {j.at("re").get<double>(), j.value("im", 0.0)};
    throw InputError("bad complex entry: " + j.dump());
}

// Flat row-major list of rows*cols entries, or a list of rows.
inline Mat parse_matrix(const json& j, int rows, int cols) {
    if (!j.is_array()) throw InputError("matrix must be an array");
    Mat M(rows, cols);
    auto scalar = [](const json& e) {
        return e.is_number() || e.is_object() || (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number());
    };
    if (static_cast<int>(j.size()) == rows * cols && std::all_of(j.begin(), j.end(), scalar)) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) M(r, c) = parse_complex(j[static_cast<std::size_t>(r * cols + c)]);
        return M;
    }
    if (static_cast<int>(j.size()) != rows) throw InputError("matrix: expected " + std::to_string(rows) + " rows");
    for (int r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw InputError("matrix: row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
        for (int c = 0; c < cols; ++c) M(r, c) = parse_complex(row[static_cast<std::size_t>(c)]);
    }
    return M;
}

inline std::vector<Mat> parse_matrix_list(const json& j, int rows, int cols, const std::string& name) {
    if (!j.is_array() || j.empty()) throw InputError(name + " must be a nonempty array of matrices");
    std::vector<Mat> out;
    for (const auto& e : j) out.push_back(parse_matrix(e, rows, cols));
    return out;
}

// {m, k_min, extension, A: [...], B: [...], rho: [...]} or the jacobi / dirac shorthands.
inline HamiltonianSystem system_from_json(const json& j) {
    try {
        const int m = j.at("m").get<int>();
        const Site k_min = j.value("k_min", Site{0});
        const Extension ext = extension_from_string(j.value("extension", std::string("constant_edge")));
        if (j.contains("jacobi")) {
            const json& jj = j.at("jacobi");
            return jacobi_system(parse_matrix_list(jj.at("p"), m, m, "jacobi.p"),
                                 parse_matrix_list(jj.at("q"), m, m, "jacobi.q"), k_min, ext);
        }
        if (j.contains("dirac")) return dirac_system(parse_matrix_list(j.at("dirac").at("b"), m, m, "dirac.b"), k_min, ext);
        return HamiltonianSystem(m, k_min, parse_matrix_list(j.at("A"), 2 * m, 2 * m, "A"),
                                 parse_matrix_list(j.at("B"), 2 * m, 2 * m, "B"),
                                 parse_matrix_list(j.at("rho"), m, m, "rho"), ext);
    } catch (const json::exception& e) {
        throw InputError(std::string("coefficient file: ") + e.what());
    }
}

inline HamiltonianSystem load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("cannot parse " + path + ": " + e.what());
    }
    return system_from_json(j);
}

inline json matrix_to_json(const Mat& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back({M(r, c).real(), M(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

inline json system_to_json(const HamiltonianSystem& sys) {
    json j{{"m", sys.m()}, {"k_min", sys.k_min()}, {"extension", to_string(sys.extension())}};
    json A = json::array(), B = json::array(), rho = json::array();
    for (Site k = sys.k_min(); k <= sys.k_max(); ++k) {
        A.push_back(matrix_to_json(sys.A(k)));
        B.push_back(matrix_to_json(sys.B(k)));
        rho.push_back(matrix_to_json(sys.rho(k)));
    }
    j["A"] = A;
    j["B"] = B;
    j["rho"] = rho;
    return j;
}

// "dirichlet", "neumann", or a JSON m x 2m matrix.
inline BoundaryData parse_boundary(const std::string& text, int m) {
    if (text == "dirichlet") return dirichlet(m);
    if (text == "neumann") return neumann(m);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception&) {
        throw InputError("boundary data must be dirichlet, neumann or a JSON matrix: " + text);
    }
    return make_boundary_data(parse_matrix(j, m, 2 * m));
}

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(tok, &pos);
        } catch (const std::exception&) {
            throw InputError("not a number: " + tok);
        }
        if (pos != tok.size()) throw InputError("not a number: " + tok);
        out.push_back(v);
    }
    return out;
}

// "re,im"
inline cplx parse_z(const std::string& s) {
    const auto v = parse_list(s);
    if (v.size() != 2) throw InputError("z must be given as re,im: " + s);
    return {v[0], v[1]};
}

// "re0,re1,nre,im0,im1,nim" -> row-major grid (real index fastest).
inline std::vector<cplx> parse_z_grid(const std::string& s) {
    const auto v = parse_list(s);
    if (v.size() != 6) throw InputError("z-grid must be re0,re1,nre,im0,im1,nim");
    const int nr = static_cast<int>(v[2]), ni = static_cast<int>(v[5]);
    if (nr < 1 || ni < 1) throw InputError("z-grid counts must be >= 1");
    std::vector<cplx> out;
    for (int b = 0; b < ni; ++b)
        for (int a = 0; a < nr; ++a) {
            const double re = nr == 1 ? v[0] : v[0] + (v[1] - v[0]) * a / (nr - 1);
            const double im = ni == 1 ? v[3] : v[3] + (v[4] - v[3]) * b / (ni - 1);
            out.emplace_back(re, im);
        }
    return out;
}

// ------------------------------ tables ---------------------------------------

using Cell = std::variant<double, long long, std::string, bool>;

inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string json_quote(const std::string& s) { return json(s).dump(); }

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, Cell>> meta;  // ordered

    void add_meta(const std::string& key, Cell v) { meta.emplace_back(key, std::move(v)); }
    void add_row(std::vector<Cell> r) {
        if (r.size() != columns.size()) throw std::logic_error("table row width mismatch");
        rows.push_back(std::move(r));
    }
};

inline std::string cell_text(const Cell& c, bool json_mode) {
    return std::visit(
        [&](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                if (json_mode && !std::isfinite(v)) return "null";
                return format_double(v);
            } else if constexpr (std::is_same_v<T, long long>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else {
                return json_mode ? json_quote(v) : v;
            }
        },
        c);
}

inline void write_csv(std::ostream& os, const Table& t, const std::string& timestamp) {
    if (!timestamp.empty()) os << "# generated " << timestamp << "\n";
    for (const auto& [k, v] : t.meta) os << "# " << k << "=" << cell_text(v, false) << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_text(r[i], false);
        os << "\n";
    }
}

inline void write_json(std::ostream& os, const Table& t, const std::string& timestamp) {
    os << "{\n";
    if (!timestamp.empty()) os << "  \"generated\": " << json_quote(timestamp) << ",\n";
    os << "  \"meta\": {";
    for (std::size_t i = 0; i < t.meta.size(); ++i)
        os << (i ? ", " : "") << json_quote(t.meta[i].first) << ": " << cell_text(t.meta[i].second, true);
    os << "},\n  \"columns\": [";
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? ", " : "") << json_quote(t.columns[i]);
    os << "],\n  \"rows\": [";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        os << (r ? ",\n    [" : "\n    [");
        for (std::size_t i = 0; i < t.rows[r].size(); ++i) os << (i ? ", " : "") << cell_text(t.rows[r][i], true);
        os << "]";
    }
    os << (t.rows.empty() ? "]\n}\n" : "\n  ]\n}\n");
}

// Column names for the re/im parts of a matrix, row-major: prefix_r_c_re, prefix_r_c_im.
inline std::vector<std::string> matrix_columns(const std::string& prefix, Eigen::Index rows, Eigen::Index cols) {
    std::vector<std::string> out;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const std::string base = prefix + "_" + std::to_string(r) + "_" + std::to_string(c);
            out.push_back(base + "_re");
            out.push_back(base + "_im");
        }
    return out;
}

inline void append_matrix(std::vector<Cell>& row, const Mat& M) {
    for (Eigen::Index r = 0; r < M.rows(); ++r)
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.emplace_back(M(r, c).real());
            row.emplace_back(M(r, c).imag());
        }
}

}  // namespace dhs
