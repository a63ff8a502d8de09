#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "errors.hpp"
#include "system.hpp"

namespace fracmanifold {

using json = nlohmann::json;

namespace detail {

inline cplx parse_complex(const json& v, const std::string& field) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw ValidationError(field + ": expected a number or [re, im]");
}

}  // namespace detail

inline json complex_to_json(cplx z) {
    if (z.imag() == 0.0) return z.real();
    return json::array({z.real(), z.imag()});
}

// {"alpha": a, "A": [[...], ...], "f": [{"out": i, "coeff": c, "powers": [...]}], "jordan_blocks": [{"lambda": l, "size": m}]}
// Indices are zero-based; complex entries are written [re, im].
inline FractionalSystem parse_system(const json& j) {
    if (!j.is_object()) throw ValidationError("system: expected a JSON object");
    FractionalSystem sys;
    if (!j.contains("alpha") || !j["alpha"].is_number()) throw ValidationError("alpha: missing or not a number");
    sys.alpha = j["alpha"].get<double>();
    if (!j.contains("A") || !j["A"].is_array() || j["A"].empty()) throw ValidationError("A: missing or empty");
    const auto& A = j["A"];
    const int d = static_cast<int>(A.size());
    sys.A.resize(d, d);
    for (int r = 0; r < d; ++r) {
        if (!A[r].is_array() || static_cast<int>(A[r].size()) != d)
            throw ValidationError("A[" + std::to_string(r) + "]: expected a row of length " + std::to_string(d));
        for (int c = 0; c < d; ++c)
            sys.A(r, c) = detail::parse_complex(A[r][c], "A[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
    sys.f = PolynomialMap(d);
    if (j.contains("f")) {
        if (!j["f"].is_array()) throw ValidationError("f: expected an array of terms");
        for (std::size_t k = 0; k < j["f"].size(); ++k) {
            const auto& t = j["f"][k];
            const std::string where = "f[" + std::to_string(k) + "]";
            if (!t.is_object() || !t.contains("out") || !t.contains("coeff") || !t.contains("powers"))
                throw ValidationError(where + ": expected {out, coeff, powers}");
            if (!t["out"].is_number_integer()) throw ValidationError(where + ".out: expected an integer");
            if (!t["powers"].is_array()) throw ValidationError(where + ".powers: expected an array");
            std::vector<int> powers;
            for (const auto& e : t["powers"]) {
                if (!e.is_number_integer()) throw ValidationError(where + ".powers: expected integers");
                powers.push_back(e.get<int>());
            }
            try {
                sys.f.add_term(t["out"].get<int>(), detail::parse_complex(t["coeff"], where + ".coeff"), powers);
            } catch (const ValidationError& e) {
                throw ValidationError(where + ": " + e.what());
            }
        }
    }
    if (j.contains("jordan_blocks")) {
        std::vector<JordanDecl> blocks;
        for (std::size_t k = 0; k < j["jordan_blocks"].size(); ++k) {
            const auto& b = j["jordan_blocks"][k];
            const std::string where = "jordan_blocks[" + std::to_string(k) + "]";
            if (!b.is_object() || !b.contains("lambda") || !b.contains("size") || !b["size"].is_number_integer())
                throw ValidationError(where + ": expected {lambda, size}");
            blocks.push_back({detail::parse_complex(b["lambda"], where + ".lambda"), b["size"].get<int>()});
        }
        sys.jordan_blocks = blocks;
    }
    sys.validate();
    return sys;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path + "': JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

inline FractionalSystem load_system(const std::string& path) {
    try {
        return parse_system(read_json_file(path));
    } catch (const ValidationError& e) {
        if (std::string(e.what()).find(path) != std::string::npos) throw;
        throw ValidationError("'" + path + "': " + e.what());
    }
}

inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Column writer for vectors that are real up to tol; otherwise re/im pairs.
struct CsvColumns {
    std::string prefix;
    int size;
    bool complex;

    void header(std::ostream& os) const {
        for (int i = 0; i < size; ++i) {
            os << ',' << prefix << i;
            if (complex) os << "_re," << prefix << i << "_im";
        }
    }
    void row(std::ostream& os, const Eigen::VectorXcd& v) const {
        for (int i = 0; i < size; ++i) {
            os << ',' << fmt_num(v[i].real());
            if (complex) os << ',' << fmt_num(v[i].imag());
        }
    }
};

inline bool effectively_real(const Eigen::MatrixXcd& M, double tol = 1e-8) {
    return M.size() == 0 || M.imag().cwiseAbs().maxCoeff() <= tol;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    if (!std::getline(in, line)) throw ValidationError("'" + path + "': empty CSV");
    t.header = split(line);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ValidationError("'" + path + "' line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " cells");
        std::vector<double> r;
        for (const auto& c : cells) {
            try {
                std::size_t used = 0;
                r.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw ValidationError("'" + path + "' line " + std::to_string(lineno) + ": '" + c + "' is not a number");
            }
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

// State vectors from columns x_0.. (or x_0_re/x_0_im ..) of a CSV table.
inline std::vector<Eigen::VectorXcd> points_from_csv(const CsvTable& t, int dim, const std::string& prefix = "x_") {
    std::vector<int> re(dim), im(dim, -1);
    for (int i = 0; i < dim; ++i) {
        re[i] = t.column(prefix + std::to_string(i));
        if (re[i] < 0) {
            re[i] = t.column(prefix + std::to_string(i) + "_re");
            im[i] = t.column(prefix + std::to_string(i) + "_im");
        }
        if (re[i] < 0) throw ValidationError("points: missing column " + prefix + std::to_string(i));
    }
    std::vector<Eigen::VectorXcd> pts;
    for (const auto& r : t.rows) {
        Eigen::VectorXcd v(dim);
        for (int i = 0; i < dim; ++i) v[i] = cplx(r[re[i]], im[i] >= 0 ? r[im[i]] : 0.0);
        pts.push_back(v);
    }
    return pts;
}

}  // namespace fracmanifold
