#ifndef DQUAD_TOOLS_CLI_HPP
#define DQUAD_TOOLS_CLI_HPP

#include "dquad/verifier.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dquad::cli {

enum ExitCode : int { exit_ok = 0, exit_invalid = 1, exit_failed = 2 };

/// Bad flags, unreadable or malformed inputs.
class InputError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Everything needed to set up a moment system from flags. The domain lives
/// in reference coordinates; `bounds` maps it back to the user's box.
struct Problem
{
    MultiIndexSet index_set;
    std::string index_label;
    BasisFamily basis;
    DomainSpec domain;
    std::vector<std::pair<double, double>> bounds;
};

struct ProblemFlags
{
    std::size_t dim = 0;
    int order = -1;
    std::string index_set = "total";
    std::string weight = "uniform";
    std::vector<double> domain;
    std::string region;
};

inline bool starts_with(const std::string& s, const std::string& prefix)
{
    return s.rfind(prefix, 0) == 0;
}

inline double affine_to_reference(double x, double lo, double hi)
{
    return (2.0 * x - (lo + hi)) / (hi - lo);
}

inline Problem make_problem(const ProblemFlags& f)
{
    Problem p;
    try {
        if (starts_with(f.index_set, "file:")) {
            p.index_set = read_index_set_file(f.index_set.substr(5));
            p.index_label = f.index_set;
        } else {
            if (f.dim < 1)
                throw InputError("--dim must be >= 1");
            if (f.order < 0)
                throw InputError("--order must be >= 0");
            if (f.index_set == "total")
                p.index_set = total_degree(f.dim, f.order);
            else if (f.index_set == "hyperbolic")
                p.index_set = hyperbolic_cross(f.dim, f.order);
            else
                throw InputError("--index-set must be total, hyperbolic or file:<path>");
            p.index_label = f.index_set + ":" + std::to_string(f.order);
        }
        const std::size_t d = p.index_set.dim();
        if (f.dim && f.dim != d)
            throw InputError("--dim does not match the index set file");
        const int deg = std::max(1, p.index_set.max_component() + 1);

        if (starts_with(f.weight, "file:")) {
            const auto table = read_recurrence_file(f.weight.substr(5));
            if (table.max_degree() < p.index_set.max_component())
                throw InputError("recurrence file too short for the index set");
            p.basis = BasisFamily::isotropic(table, d);
            p.domain = DomainSpec::box(d, -1.0, 1.0, Family::custom);
        } else if (f.weight == "uniform" || f.weight == "chebyshev") {
            const Family fam = f.weight == "uniform" ? Family::legendre : Family::chebyshev_first;
            p.basis = BasisFamily::isotropic(fam, d, deg);
            p.domain = DomainSpec::box(d, -1.0, 1.0, fam);
        } else if (f.weight == "gaussian") {
            if (!f.domain.empty())
                throw InputError("--domain does not apply to the gaussian weight");
            p.basis = BasisFamily::isotropic(Family::hermite_probabilist, d, deg);
            p.domain = DomainSpec::gaussian(d);
        } else {
            throw InputError("--weight must be uniform, gaussian, chebyshev or file:<path>");
        }

        if (p.domain.kind == DomainKind::box) {
            double lo = -1.0, hi = 1.0;
            if (!f.domain.empty()) {
                if (f.domain.size() != 2 || !(f.domain[0] < f.domain[1]))
                    throw InputError("--domain expects lo,hi with lo < hi");
                lo = f.domain[0];
                hi = f.domain[1];
            }
            p.bounds.assign(d, {lo, hi});
        }

        if (!f.region.empty()) {
            std::vector<PenaltyRegion> regions;
            if (f.region == "ushape")
                regions = u_shape_regions();
            else if (starts_with(f.region, "file:"))
                regions = read_regions_file(f.region.substr(5));
            else
                throw InputError("--region must be ushape or file:<path>");
            if (p.domain.kind != DomainKind::box)
                throw InputError("--region needs a bounded domain");
            // Region files use user coordinates.
            for (auto& r : regions) {
                r.validate(d);
                for (std::size_t j = 0; j < d; ++j) {
                    const auto [lo, hi] = p.bounds[j];
                    r.ranges[j] = {affine_to_reference(r.ranges[j].first, lo, hi),
                                   affine_to_reference(r.ranges[j].second, lo, hi)};
                }
            }
            p.domain.forbidden_regions = std::move(regions);
        }
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    return p;
}

inline void write_atomically(const std::string& path, const std::string& contents)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out.flush())
            throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

inline std::string stem_of(const std::string& path)
{
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path;
    return path.substr(0, dot);
}

/// "auto" or "fixed:<v>".
inline std::optional<double> parse_lambda(const std::string& s)
{
    if (s == "auto")
        return std::nullopt;
    if (starts_with(s, "fixed:")) {
        const std::string v = s.substr(6);
        double x = 0.0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
        if (res.ec == std::errc() && res.ptr == v.data() + v.size() && x >= 0.0)
            return x;
    }
    throw InputError("--lambda must be auto or fixed:<non-negative value>");
}

/// Rows of comma separated numbers, '#' comments skipped.
inline std::vector<std::vector<double>> read_number_rows(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t\r");
            const auto e = cell.find_last_not_of(" \t\r");
            if (b == std::string::npos)
                throw InputError(path + ": empty cell");
            double v = 0.0;
            const auto res = std::from_chars(cell.data() + b, cell.data() + e + 1, v);
            if (res.ec != std::errc() || res.ptr != cell.data() + e + 1)
                throw InputError(path + ": bad number '" + cell + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw InputError(path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw InputError(path + ": no rows");
    return rows;
}

/// Node matrix from a rule JSON (reference coordinates) or a CSV with d
/// columns (nodes only) or d + 1 columns (weight last, ignored).
inline Eigen::MatrixXd read_nodes(const std::string& path, std::size_t d)
{
    if (!(path.size() >= 4 && path.substr(path.size() - 4) == ".csv")) {
        try {
            return reference_nodes(read_rule_file(path));
        } catch (const std::exception& e) {
            throw InputError(e.what());
        }
    }
    const auto rows = read_number_rows(path);
    const auto cols = rows.front().size();
    if (cols != d && cols != d + 1)
        throw InputError(path + ": expected " + std::to_string(d) + " or " + std::to_string(d + 1) + " columns");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return X;
}

struct DesignFlags
{
    ProblemFlags problem;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;
    int max_outer = 20;
    int max_iters = 1000;
    std::string lambda = "auto";
    std::string format = "json";
    bool extended = false;
    std::string out;
    std::string trace;
    std::string manifest;
    std::string init;
    double init_jitter = 0.02;
    bool fixed_size = false;
    std::size_t initial_size = 0;
    std::size_t max_size = 0;
};

struct VerifyFlags
{
    std::string rule;
    ProblemFlags problem;
    double tol = 1e-8;
    std::string report;
};

struct CompareFlags
{
    ProblemFlags problem;
    std::vector<int> orders;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    std::string out;
};

struct LebesgueFlags
{
    std::string nodes;
    int padua = -1;
    ProblemFlags problem;
    int resolution = 200;
    std::string grid_out;
    bool degenerate = false;
};

inline void add_problem_flags(CLI::App* cmd, ProblemFlags& f, bool with_region)
{
    cmd->add_option("--dim", f.dim, "Dimension");
    cmd->add_option("--order", f.order, "Order r of the index set");
    cmd->add_option("--index-set", f.index_set, "total | hyperbolic | file:<path>")->capture_default_str();
    cmd->add_option("--weight", f.weight, "uniform | gaussian | chebyshev | file:<recurrence>")->capture_default_str();
    cmd->add_option("--domain", f.domain, "Box lo,hi applied to every axis (affine rescaling)")->delimiter(',')->expected(2);
    if (with_region)
        cmd->add_option("--region", f.region, "Forbidden regions: ushape | file:<json>");
}

inline nlohmann::json problem_echo(const ProblemFlags& f)
{
    nlohmann::json j;
    j["dim"] = f.dim;
    j["order"] = f.order;
    j["index_set"] = f.index_set;
    j["weight"] = f.weight;
    j["domain"] = f.domain;
    j["region"] = f.region;
    return j;
}

inline Eigen::MatrixXd initial_nodes_from(const DesignFlags& f, const Problem& p)
{
    Eigen::MatrixXd X;
    const std::size_t d = p.index_set.dim();
    if (starts_with(f.init, "padua:")) {
        if (d != 2)
            throw InputError("--init padua:<r> needs --dim 2");
        int r = -1;
        const std::string v = f.init.substr(6);
        std::from_chars(v.data(), v.data() + v.size(), r);
        if (r < 0)
            throw InputError("--init padua:<r> needs r >= 0");
        X = padua_points(r);
    } else if (starts_with(f.init, "file:")) {
        // Initial node files use user coordinates.
        X = read_nodes(f.init.substr(5), d);
        if (!p.bounds.empty())
            X = reference_nodes(QuadratureRule{d, X, Eigen::VectorXd::Ones(X.rows()), "", Family::legendre,
                                               DomainKind::box, p.bounds});
    } else {
        throw InputError("--init must be padua:<r> or file:<path>");
    }
    // Pull the start off the boundary and perturb it.
    detail::Uniform01 rng(f.seed, 7);
    for (Eigen::Index i = 0; i < X.size(); ++i)
        X.data()[i] = X.data()[i] * (1.0 - f.init_jitter) + 0.5 * f.init_jitter * (2.0 * rng() - 1.0);
    return X;
}

inline int cmd_design(const DesignFlags& f, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Problem p = make_problem(f.problem);
    const std::size_t d = p.index_set.dim();
    if (d > 20 && !f.extended)
        throw InputError("dimensions above 20 need --extended");
    if (!(f.tol > 0.0))
        throw InputError("--tol must be positive");
    if (f.format != "json" && f.format != "csv")
        throw InputError("--format must be json or csv");

    DesignConfig cfg;
    cfg.tol = f.tol;
    cfg.seed = f.seed;
    cfg.max_outer = f.max_outer;
    cfg.solver.max_iters = f.max_iters;
    cfg.solver.lambda_override = parse_lambda(f.lambda);
    cfg.solver.high_dim_mode = f.extended && d > 20;
    cfg.fixed_size = f.fixed_size;
    cfg.max_size = f.max_size;
    if (f.initial_size)
        cfg.initial_size = f.initial_size;
    if (!f.init.empty())
        cfg.initial_nodes = initial_nodes_from(f, p);
    if (f.fixed_size && !cfg.initial_nodes && !cfg.initial_size)
        throw InputError("--fixed-size needs --init or --initial-size");
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    const std::string rule_path = f.out.empty() ? "rule." + f.format : f.out;
    const std::string trace_path = f.trace.empty() ? stem_of(rule_path) + ".trace.csv" : f.trace;
    const std::string manifest_path = f.manifest.empty() ? stem_of(rule_path) + ".manifest.json" : f.manifest;

    nlohmann::json manifest;
    manifest["command"] = "design";
    manifest["argv"] = argv;
    nlohmann::json config = problem_echo(f.problem);
    config["tol"] = f.tol;
    config["seeds"] = f.seeds.empty() ? std::vector<std::uint64_t>{f.seed} : f.seeds;
    config["max_outer"] = f.max_outer;
    config["max_iters"] = f.max_iters;
    config["lambda"] = f.lambda;
    config["format"] = f.format;
    config["extended"] = f.extended;
    config["normal_equations"] = cfg.solver.high_dim_mode;
    config["init"] = f.init;
    config["init_jitter"] = f.init_jitter;
    config["fixed_size"] = f.fixed_size;
    config["initial_size"] = f.initial_size;
    config["max_size"] = f.max_size;
    config["lambda_residual_factor"] = cfg.solver.lambda_residual_factor;
    config["progress_window"] = cfg.solver.progress_window;
    manifest["config"] = config;

    auto finish = [&](const std::string& outcome, int code, const nlohmann::json& artifacts) {
        manifest["outcome"] = outcome;
        manifest["exit_code"] = code;
        manifest["artifacts"] = artifacts;
        manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_atomically(manifest_path, manifest.dump(2) + "\n");
        return code;
    };

    DesignResult res;
    try {
        res = f.seeds.empty() ? design(p.index_set, p.domain, p.basis, cfg)
                              : design_multi_seed(p.index_set, p.domain, p.basis, cfg, f.seeds);
    } catch (const DesignFailure& e) {
        std::ostringstream t;
        write_trace_csv(t, e.best_trace());
        write_atomically(trace_path, t.str());
        err << "design did not converge: " << e.what() << '\n';
        manifest["seed"] = f.seeds.empty() ? f.seed : f.seeds.front();
        return finish("not_converged", exit_failed, {{"trace", trace_path}});
    }

    QuadratureRule rule = res.rule;
    rule.index_set = p.index_label;
    if (!p.bounds.empty()) {
        rule.nodes = user_nodes(rule.nodes, p.bounds);
        rule.bounds = p.bounds;
    }
    std::ostringstream body;
    if (f.format == "csv")
        write_rule_csv(body, rule);
    else
        body << rule_to_json(rule).dump(2) << '\n';
    write_atomically(rule_path, body.str());
    std::ostringstream t;
    write_trace_csv(t, res.trace);
    write_atomically(trace_path, t.str());

    out << "n=" << rule.size() << " residual=" << rule.achieved_residual << " min_weight=" << rule.weights.minCoeff()
        << " seed=" << rule.seed << " rule=" << rule_path << '\n';
    manifest["seed"] = rule.seed;
    manifest["n"] = rule.size();
    manifest["achieved_residual"] = rule.achieved_residual;
    return finish("converged", exit_ok, {{"rule", rule_path}, {"trace", trace_path}});
}

/// Fills in order/index set/weight from the rule's own metadata when the
/// flags leave them open.
inline ProblemFlags verify_problem(const VerifyFlags& f, const QuadratureRule& rule)
{
    ProblemFlags pf = f.problem;
    if (pf.dim == 0)
        pf.dim = rule.dim;
    if (pf.order < 0 && !starts_with(pf.index_set, "file:")) {
        const auto colon = rule.index_set.find(':');
        if (colon == std::string::npos)
            throw InputError("--order is required (the rule carries no index set)");
        pf.index_set = rule.index_set.substr(0, colon);
        pf.order = std::stoi(rule.index_set.substr(colon + 1));
    }
    return pf;
}

inline int cmd_verify(const VerifyFlags& f, std::ostream& out, std::ostream& err)
{
    QuadratureRule rule;
    try {
        rule = read_rule_file(f.rule);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    ProblemFlags pf = verify_problem(f, rule);
    // Weight flag defaults to the family recorded in the rule.
    if (f.problem.weight == "uniform" && rule.family != Family::legendre) {
        if (rule.family == Family::hermite_probabilist)
            pf.weight = "gaussian";
        else if (rule.family == Family::chebyshev_first)
            pf.weight = "chebyshev";
    }
    const Problem p = make_problem(pf);
    if (p.index_set.dim() != rule.dim)
        throw InputError("rule dimension does not match the index set");
    if (!f.problem.domain.empty())
        rule.bounds = p.bounds;

    const ExactnessReport rep = exactness(rule, p.index_set, p.basis);
    if (!f.report.empty()) {
        nlohmann::json j = report_to_json(rep);
        j["rule"] = f.rule;
        j["index_set"] = p.index_label;
        j["tol"] = f.tol;
        write_atomically(f.report, j.dump(2) + "\n");
    }
    out << "n=" << rule.size() << " max_error=" << rep.max_error << " epsilon=" << rep.epsilon
        << " min_weight=" << rep.min_weight << '\n';
    if (rep.negative_weights > 0) {
        err << "negative weight at node " << rep.first_negative << '\n';
        return exit_failed;
    }
    if (rep.min_weight == 0.0) {
        err << "zero weight in rule\n";
        return exit_failed;
    }
    if (!(rep.max_error <= f.tol)) {
        err << "max moment error " << rep.max_error << " exceeds " << f.tol << '\n';
        return exit_failed;
    }
    out << "PASS\n";
    return exit_ok;
}

struct CompareRow
{
    int order;
    std::string method;
    std::size_t n;
    double max_moment_error;
    double min_weight;
};

inline std::vector<CompareRow> compare_rows(const CompareFlags& f, int order)
{
    ProblemFlags pf = f.problem;
    pf.order = order;
    const Problem p = make_problem(pf);
    const std::size_t d = p.index_set.dim();
    std::vector<CompareRow> rows;
    auto add = [&](const std::string& method, const PointRule& rule) {
        const auto rep = exactness(rule, p.index_set, p.basis);
        rows.push_back({order, method, rule.size(), rep.max_error, rep.min_weight});
    };

    DesignConfig cfg;
    cfg.tol = f.tol;
    cfg.seed = f.seed;
    try {
        const auto res = design(p.index_set, p.domain, p.basis, cfg);
        add("designed", PointRule{res.rule.nodes, res.rule.weights});
    } catch (const DesignFailure&) {
        rows.push_back({order, "designed", 0, std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN()});
    }
    if (d > 8)
        return rows;

    const auto& rec = p.basis.table(0);
    const int k = sparse_grid_level(p.index_set);
    add("sparse_grid", smolyak(rec, d, k, Growth::gauss_linear));
    if (p.domain.kind == DomainKind::box && rec.family != Family::custom)
        add("sparse_grid_nested", smolyak(rec, d, k, Growth::clenshaw_curtis_nested));
    const int m = p.index_set.max_component() / 2 + 1;
    if (std::pow(static_cast<double>(m), static_cast<double>(d)) <= 1e6)
        add("tensor", tensor_rule(std::vector<UnivariateRule>(d, gauss_rule(rec, m))));
    return rows;
}

inline int cmd_compare(const CompareFlags& f, std::ostream& out)
{
    std::vector<int> orders = f.orders;
    if (orders.empty()) {
        if (f.problem.order < 0)
            throw InputError("compare needs --order or --orders");
        orders.push_back(f.problem.order);
    }
    if (f.problem.region.size())
        throw InputError("compare does not take --region");
    std::ostringstream csv;
    csv.precision(6);
    csv << "order,method,n,max_moment_error,min_weight\n";
    for (int r : orders)
        for (const auto& row : compare_rows(f, r))
            csv << row.order << ',' << row.method << ',' << row.n << ',' << row.max_moment_error << ','
                << row.min_weight << '\n';
    if (f.out.empty())
        out << csv.str();
    else
        write_atomically(f.out, csv.str());
    return exit_ok;
}

inline int cmd_lebesgue(const LebesgueFlags& f, std::ostream& out, std::ostream& err)
{
    ProblemFlags pf = f.problem;
    if (pf.dim == 0)
        pf.dim = f.degenerate ? 1 : 2;
    if (pf.dim == 1 && !f.degenerate)
        throw InputError("d = 1 needs --degenerate");
    if (pf.dim > 2)
        throw InputError("lebesgue supports d = 2 (or d = 1 with --degenerate)");
    if (pf.weight == "gaussian")
        throw InputError("lebesgue needs a bounded weight");
    if (f.resolution < 2)
        throw InputError("--resolution must be >= 2");

    Eigen::MatrixXd X;
    if (f.padua >= 0) {
        if (pf.dim != 2)
            throw InputError("--padua needs d = 2");
        X = padua_points(f.padua);
        if (pf.order < 0)
            pf.order = f.padua;
    } else if (!f.nodes.empty()) {
        X = read_nodes(f.nodes, pf.dim);
        if (!pf.domain.empty())
            X = reference_nodes(QuadratureRule{pf.dim, X, Eigen::VectorXd::Ones(X.rows()), "", Family::legendre,
                                               DomainKind::box,
                                               std::vector<std::pair<double, double>>(pf.dim, {pf.domain[0], pf.domain[1]})});
    } else {
        throw InputError("lebesgue needs a node file or --padua <r>");
    }
    pf.domain.clear();
    const Problem p = make_problem(pf);
    if (static_cast<std::size_t>(X.rows()) != p.index_set.size())
        throw InputError("node count " + std::to_string(X.rows()) + " differs from |index set| = " +
                         std::to_string(p.index_set.size()));
    try {
        const LebesgueFunction L(X, p.index_set, p.basis);
        const Eigen::MatrixXd g = L.grid(f.resolution);
        const auto vcol = static_cast<Eigen::Index>(pf.dim);
        out << "L=" << g.col(vcol).maxCoeff() << '\n';
        if (!f.grid_out.empty()) {
            std::ostringstream csv;
            csv.precision(17);
            csv << (pf.dim == 1 ? "x,L\n" : "x,y,L\n");
            for (Eigen::Index q = 0; q < g.rows(); ++q) {
                for (Eigen::Index c = 0; c <= vcol; ++c)
                    csv << g(q, c) << (c == vcol ? '\n' : ',');
            }
            write_atomically(f.grid_out, csv.str());
        }
    } catch (const NotUnisolvent& e) {
        err << e.what() << '\n';
        return exit_failed;
    }
    return exit_ok;
}

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Re-runs the argv recorded in a manifest.
inline int cmd_replay(const std::string& manifest_path, std::ostream& out, std::ostream& err)
{
    std::ifstream in(manifest_path);
    if (!in)
        throw InputError("cannot open manifest " + manifest_path);
    std::vector<std::string> argv;
    try {
        argv = nlohmann::json::parse(in).at("argv").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("manifest: ") + e.what());
    }
    if (!argv.empty() && argv.front() == "replay")
        throw InputError("manifest records a replay");
    return run(argv, out, err);
}

/// Entry point; args excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Designed quadrature: moment-matching cubature rules", "dquad"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    DesignFlags df;
    auto* design_cmd = app.add_subcommand("design", "Design a quadrature rule");
    add_problem_flags(design_cmd, df.problem, true);
    design_cmd->add_option("--tol", df.tol, "Residual tolerance")->capture_default_str();
    design_cmd->add_option("--seed", df.seed, "Random seed")->capture_default_str();
    design_cmd->add_option("--seeds", df.seeds, "Race these seeds; the lowest converged wins")->delimiter(',');
    design_cmd->add_option("--max-outer", df.max_outer, "Outer elimination passes")->capture_default_str();
    design_cmd->add_option("--max-iters", df.max_iters, "Gauss-Newton iterations per solve")->capture_default_str();
    design_cmd->add_option("--lambda", df.lambda, "auto | fixed:<v>")->capture_default_str();
    design_cmd->add_option("--format", df.format, "json | csv")->capture_default_str();
    design_cmd->add_flag("--extended", df.extended, "Allow d > 20 (normal-equation mode) and long runs");
    design_cmd->add_option("--out", df.out, "Rule file (default rule.<format>)");
    design_cmd->add_option("--trace", df.trace, "Trace CSV (default <out>.trace.csv)");
    design_cmd->add_option("--manifest", df.manifest, "Run manifest (default <out>.manifest.json)");
    design_cmd->add_option("--init", df.init, "Start nodes: padua:<r> | file:<path>");
    design_cmd->add_option("--init-jitter", df.init_jitter, "Perturbation of --init nodes")->capture_default_str();
    design_cmd->add_flag("--fixed-size", df.fixed_size, "Solve only at the starting size");
    design_cmd->add_option("--initial-size", df.initial_size, "Starting node count");
    design_cmd->add_option("--max-size", df.max_size, "Largest node count tried while enriching");

    VerifyFlags vf;
    auto* verify_cmd = app.add_subcommand("verify", "Check a rule's moment errors and weights");
    verify_cmd->add_option("rule", vf.rule, "Rule file (.json or .csv)")->required();
    add_problem_flags(verify_cmd, vf.problem, false);
    verify_cmd->add_option("--tol", vf.tol, "Largest allowed moment error")->capture_default_str();
    verify_cmd->add_option("--report", vf.report, "Write the exactness report as JSON");

    CompareFlags cf;
    auto* compare_cmd = app.add_subcommand("compare", "Designed vs sparse-grid vs tensor rules");
    add_problem_flags(compare_cmd, cf.problem, false);
    compare_cmd->add_option("--orders", cf.orders, "Several orders, comma separated")->delimiter(',');
    compare_cmd->add_option("--tol", cf.tol, "Design tolerance")->capture_default_str();
    compare_cmd->add_option("--seed", cf.seed, "Design seed")->capture_default_str();
    compare_cmd->add_option("--out", cf.out, "CSV output (default stdout)");

    LebesgueFlags lf;
    auto* leb_cmd = app.add_subcommand("lebesgue", "Lebesgue constant of an interpolation node set");
    leb_cmd->add_option("nodes", lf.nodes, "Node or rule file");
    leb_cmd->add_option("--padua", lf.padua, "Use the Padua points of this degree");
    add_problem_flags(leb_cmd, lf.problem, false);
    leb_cmd->add_option("--resolution", lf.resolution, "Grid points per axis")->capture_default_str();
    leb_cmd->add_option("--grid-out", lf.grid_out, "Write Lebesgue function samples as CSV");
    leb_cmd->add_flag("--degenerate", lf.degenerate, "Allow the one-dimensional case");

    std::string manifest_in;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay_cmd->add_option("manifest", manifest_in, "Manifest JSON")->required();

    const std::vector<std::string> argv = args;
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_invalid;
    }

    try {
        if (*design_cmd)
            return cmd_design(df, argv, out, err);
        if (*verify_cmd)
            return cmd_verify(vf, out, err);
        if (*compare_cmd)
            return cmd_compare(cf, out);
        if (*leb_cmd)
            return cmd_lebesgue(lf, out, err);
        if (*replay_cmd)
            return cmd_replay(manifest_in, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failed;
    }
    return exit_invalid;
}

} // namespace dquad::cli

#endif // DQUAD_TOOLS_CLI_HPP
