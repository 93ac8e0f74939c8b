#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochabound/certify.hpp"
#include "stochabound/errors.hpp"
#include "stochabound/kernel.hpp"
#include "stochabound/montecarlo.hpp"
#include "stochabound/sde.hpp"

namespace stochabound {

// JSON wire formats and CSV exports. Matrices travel as nested arrays in
// row-major order; kernels as {"family", "params", "n", "m"}. JSON output
// keeps insertion order and full double precision; CSV rounds to 12
// significant digits.

using Json = nlohmann::ordered_json;

struct ExperimentConfig {
    SystemSpec system;
    std::optional<Matrix> q_matrix;  // certification Q; identity when absent
    int n_paths = 100;
    std::uint64_t master_seed = 42;
    std::vector<double> epsilons = {0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
    double tail_fraction = 0.2;
    std::string output_dir;
};

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json vector_to_json(const Vector& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Matrix matrix_from_json(const Json& j, const std::string& name) {
    if (!j.is_array() || j.empty()) {
        throw InputError(name + ": expected a nonempty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j[0].is_array() || j[0].empty()) {
        throw InputError(name + ": rows must be nonempty arrays");
    }
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw InputError(name + ": ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const Json& cell = row[static_cast<std::size_t>(c)];
            if (!cell.is_number()) {
                throw InputError(name + ": entries must be numbers");
            }
            m(i, c) = cell.get<double>();
        }
    }
    require_finite(m, name);
    return m;
}

inline Vector vector_from_json(const Json& j, const std::string& name) {
    if (!j.is_array() || j.empty()) {
        throw InputError(name + ": expected a nonempty array");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw InputError(name + ": entries must be numbers");
        }
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Json kernel_to_json(const KernelSpec& spec) {
    Json params = Json::object();
    struct Visitor {
        Json& params;
        void operator()(const ConstantKernel& k) const { params["G0"] = matrix_to_json(k.g0); }
        void operator()(const CosineScalarKernel& k) const {
            params["a"] = k.amplitude;
            params["k"] = k.frequency;
        }
        void operator()(const AffineNormKernel& k) const {
            params["G0"] = matrix_to_json(k.g0);
            params["gamma"] = k.gamma;
        }
        void operator()(const LinearMatrixKernel& k) const {
            params["G0"] = matrix_to_json(k.g0);
            Json coeffs = Json::array();
            for (const Matrix& gi : k.coeffs) coeffs.push_back(matrix_to_json(gi));
            params["G"] = std::move(coeffs);
        }
    };
    std::visit(Visitor{params}, spec.family);
    return Json{{"family", family_name(spec)},
                {"params", std::move(params)},
                {"n", spec.state_dim},
                {"m", spec.noise_dim}};
}

inline KernelSpec kernel_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("family") || !j.contains("params")) {
        throw InputError("kernel: expected {family, params, n, m}");
    }
    const std::string family = j.at("family").get<std::string>();
    const Json& params = j.at("params");
    KernelSpec spec;
    if (family == "Constant") {
        spec = make_constant_kernel(matrix_from_json(params.at("G0"), "kernel.G0"));
    } else if (family == "CosineScalar") {
        spec = make_cosine_scalar_kernel(params.at("a").get<double>(),
                                         params.at("k").get<double>());
    } else if (family == "AffineNorm") {
        spec = make_affine_norm_kernel(matrix_from_json(params.at("G0"), "kernel.G0"),
                                       params.at("gamma").get<double>());
    } else if (family == "LinearMatrix") {
        std::vector<Matrix> coeffs;
        for (const Json& gi : params.at("G")) {
            coeffs.push_back(matrix_from_json(gi, "kernel.G[i]"));
        }
        spec = make_linear_matrix_kernel(matrix_from_json(params.at("G0"), "kernel.G0"),
                                         std::move(coeffs));
    } else {
        throw InputError("kernel: unknown family \"" + family + "\"");
    }
    if (j.contains("n") && j.at("n").get<int>() != spec.state_dim) {
        throw InputError("kernel: declared n disagrees with parameters");
    }
    if (j.contains("m") && j.at("m").get<int>() != spec.noise_dim) {
        throw InputError("kernel: declared m disagrees with parameters");
    }
    return spec;
}

inline Json initial_law_to_json(const InitialLaw& law) {
    if (law.stddev == 0.0) {
        return Json{{"type", "fixed"}, {"value", vector_to_json(law.mean)}};
    }
    return Json{{"type", "gaussian"}, {"mean", vector_to_json(law.mean)}, {"std", law.stddev}};
}

inline InitialLaw initial_law_from_json(const Json& j) {
    InitialLaw law;
    if (!j.is_object() || !j.contains("type")) {
        throw InputError("x0: expected {type: fixed|gaussian, ...}");
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "fixed") {
        law.mean = vector_from_json(j.at("value"), "x0.value");
        law.stddev = 0.0;
    } else if (type == "gaussian") {
        law.mean = vector_from_json(j.at("mean"), "x0.mean");
        law.stddev = j.at("std").get<double>();
        if (!(law.stddev >= 0.0) || !std::isfinite(law.stddev)) {
            throw InputError("x0.std: must be finite and >= 0");
        }
    } else {
        throw InputError("x0.type: unknown type \"" + type + "\"");
    }
    if (!law.mean.allFinite()) {
        throw InputError("x0: mean must be finite");
    }
    return law;
}

inline Json system_to_json(const SystemSpec& spec) {
    return Json{{"A", matrix_to_json(spec.a)},
                {"kernel", kernel_to_json(spec.kernel)},
                {"x0", initial_law_to_json(spec.x0)},
                {"T", spec.horizon},
                {"dt", spec.dt}};
}

inline SystemSpec system_from_json(const Json& j) {
    SystemSpec spec;
    spec.a = matrix_from_json(j.at("A"), "system.A");
    spec.kernel = kernel_from_json(j.at("kernel"));
    spec.x0 = initial_law_from_json(j.at("x0"));
    spec.horizon = j.at("T").get<double>();
    spec.dt = j.at("dt").get<double>();
    validate_system(spec);
    return spec;
}

inline Json config_to_json(const ExperimentConfig& config) {
    Json j{{"system", system_to_json(config.system)},
           {"n_paths", config.n_paths},
           {"master_seed", config.master_seed},
           {"epsilons", config.epsilons},
           {"tail_fraction", config.tail_fraction}};
    if (config.q_matrix) j["q_matrix"] = matrix_to_json(*config.q_matrix);
    if (!config.output_dir.empty()) j["output_dir"] = config.output_dir;
    return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig config;
    if (!j.is_object() || !j.contains("system")) {
        throw InputError("config: missing \"system\"");
    }
    config.system = system_from_json(j.at("system"));
    if (j.contains("q_matrix")) {
        config.q_matrix = matrix_from_json(j.at("q_matrix"), "q_matrix");
    }
    if (j.contains("n_paths")) config.n_paths = j.at("n_paths").get<int>();
    if (j.contains("master_seed")) config.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("epsilons")) {
        config.epsilons = j.at("epsilons").get<std::vector<double>>();
    }
    if (j.contains("tail_fraction")) config.tail_fraction = j.at("tail_fraction").get<double>();
    if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
    if (config.n_paths < 2) {
        throw InputError("config: n_paths must be >= 2");
    }
    if (!(config.tail_fraction > 0.0) || config.tail_fraction > 1.0) {
        throw InputError("config: tail_fraction must lie in (0, 1]");
    }
    return config;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("config: cannot open \"" + path + "\"");
    }
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("config: JSON parse error: ") + e.what());
    }
    return config_from_json(j);
}

/// Certification report. Bound fields are null when the condition fails
/// (the bounds diverge at the strict-condition boundary). `notes` carries
/// any documented discrepancies for the built-in reproduction study.
inline Json certification_report_json(const LyapunovCertificate& cert,
                                      const KernelConstants& constants,
                                      const std::optional<BoundReport>& bounds,
                                      double tail_epsilon,
                                      const std::vector<std::string>& notes) {
    auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    Json j;
    j["condition_holds"] = cert.condition_holds;
    j["margin"] = cert.condition_margin;
    if (bounds) {
        j["b_limit"] = bounds->b_limit;
        j["b_sup"] = bounds->b_sup;
        j["b_min"] = bounds->b_min;
        j["kappa"] = bounds->kappa;
        j["discriminant"] = bounds->discriminant;
        const TailBound tb = tail_bound(cert, bounds->e_x0, tail_epsilon);
        j["tail_bound"] = Json{{"epsilon", tb.epsilon},
                               {"p_paper", clamp01(tb.p_paper)},
                               {"p_derived", clamp01(tb.p_derived)}};
    } else {
        j["b_limit"] = nullptr;
        j["b_sup"] = nullptr;
        j["b_min"] = nullptr;
        j["kappa"] = cert.lambda_bar_p / cert.lambda_lo_q;
        j["discriminant"] = nullptr;
        j["tail_bound"] = nullptr;
    }
    j["notes"] = notes;
    j["certificate"] = Json{{"P", matrix_to_json(cert.p)},
                            {"Q", matrix_to_json(cert.q)},
                            {"lambda_bar_P", cert.lambda_bar_p},
                            {"lambda_lo_P", cert.lambda_lo_p},
                            {"lambda_lo_Q", cert.lambda_lo_q}};
    j["constants"] =
        Json{{"gamma", constants.gamma}, {"c", constants.c}, {"gamma_g", constants.gamma_g}};
    if (bounds) {
        j["roots"] = Json{{"root_pos", bounds->root_pos}, {"root_neg", bounds->root_neg}};
        j["e_x0"] = bounds->e_x0;
    }
    return j;
}

inline Json verdict_to_json(const VerificationVerdict& verdict) {
    return Json{{"b_limit", verdict.b_limit},
                {"b_sup", verdict.b_sup},
                {"tail_mean", verdict.tail_mean},
                {"tail_sem", verdict.tail_sem},
                {"max_mean_norm", verdict.max_mean_norm},
                {"limit_ok", verdict.limit_ok},
                {"sup_ok", verdict.sup_ok},
                {"exceedance_ok", verdict.exceedance_ok},
                {"exceedance_applicable", verdict.exceedance_applicable},
                {"supermartingale_ok", verdict.supermartingale_ok},
                {"all_ok", verdict.all_ok()}};
}

namespace detail {

inline std::string format_sig12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace detail

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot open \"" + path + "\" for writing");
    }
    out << content;
}

inline void write_json_file(const std::string& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline void write_mean_norm_csv(const std::string& path, const EnsembleResult& ens) {
    std::string out = "t,mean_norm,sem_norm\n";
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
        out += detail::format_sig12(ens.times[k]);
        out += ',';
        out += detail::format_sig12(ens.mean_norm[k]);
        out += ',';
        out += detail::format_sig12(ens.sem_norm[k]);
        out += '\n';
    }
    write_text_file(path, out);
}

inline void write_sup_norms_csv(const std::string& path, const EnsembleResult& ens) {
    std::string out = "path_index,sup_norm\n";
    for (std::size_t p = 0; p < ens.sup_norms.size(); ++p) {
        out += std::to_string(p);
        out += ',';
        out += detail::format_sig12(ens.sup_norms[p]);
        out += '\n';
    }
    write_text_file(path, out);
}

inline void write_exceedance_csv(const std::string& path,
                                 const std::vector<ExceedancePoint>& points) {
    auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    std::string out = "epsilon,empirical_p,bound_p_derived,bound_p_paper\n";
    for (const auto& pt : points) {
        out += detail::format_sig12(pt.epsilon);
        out += ',';
        out += detail::format_sig12(pt.empirical);
        out += ',';
        out += detail::format_sig12(clamp01(pt.p_derived));
        out += ',';
        out += detail::format_sig12(clamp01(pt.p_paper));
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace stochabound
