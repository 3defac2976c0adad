#include "bvlab/app.hpp"

#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "bvlab/cost.hpp"
#include "bvlab/critical.hpp"
#include "bvlab/demo.hpp"
#include "bvlab/error.hpp"
#include "bvlab/flow.hpp"
#include "bvlab/heteroclinic.hpp"
#include "bvlab/limit.hpp"
#include "bvlab/report.hpp"

namespace bvlab {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

Json vec(const Vector& v) { return Json(std::vector<double>(v.begin(), v.end())); }

std::string eps_tag(std::size_t i, double eps) {
    std::ostringstream o;
    o << "trajectory_" << i << "_eps" << eps << ".csv";
    return o.str();
}

Json diagnostics_or_null(const Trajectory& tr, const RunConfig& rc) {
    if (tr.first_order) return Json();
    return to_json(apriori_diagnostics(tr, rc.energy(), *rc.A, *rc.B));
}

void check_dim(const Vector& v, const RunConfig& rc, const char* what) {
    if (v.size() != rc.energy().dim())
        config_error(std::string(what) + " has dimension " + std::to_string(v.size()) + ", the potential " +
                     std::to_string(rc.energy().dim()));
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        if (e.code() == ErrorCode::ConfigError) return kExitConfig;
        if (e.code() == ErrorCode::LedgerViolation) return kExitFailed;
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

Vector parse_vector(const std::string& text) {
    Vector v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (item.empty() || used != item.size() || !std::isfinite(x)) config_error("not a number list: '" + text + "'");
        v.push_back(x);
    }
    if (v.empty()) config_error("empty vector");
    return v;
}

RunConfig resolve_config(const CommonOptions& opts, bool allow_default) {
    RunConfig rc;
    if (opts.config) rc = load_run_config(*opts.config);
    else if (allow_default) rc = parse_run_config(Json{{"potential", {{"kind", "appendix"}}}});
    else config_error("this command needs --config");
    if (opts.seed) {
        rc.seed = *opts.seed;
        rc.cost.seed = rc.certify.cost.seed = rc.seed;
    }
    return rc;
}

std::string resolve_output_dir(const CommonOptions& opts, const RunConfig& rc) {
    const std::string dir = opts.out ? *opts.out : rc.output_dir;
    if (dir.empty()) config_error("empty output directory");
    return dir;
}

int cmd_simulate(const CommonOptions& opts, std::ostream& out) {
    const RunConfig rc = resolve_config(opts, false);
    const std::string dir = resolve_output_dir(opts, rc);
    if (!rc.epsilon) config_error("simulate needs 'epsilon'");
    const double eps = *rc.epsilon;
    Vector u0 = rc.u0;
    if (!rc.u0_slope.empty())
        for (std::size_t k = 0; k < u0.size(); ++k) u0[k] += eps * rc.u0_slope[k];
    const Vector v0 = rc.v0.empty() ? Vector(u0.size(), 0.0) : rc.v0;
    const Trajectory tr =
        rc.first_order ? integrate_gradient_flow(rc.energy(), eps, u0, rc.t0, rc.t1, rc.ctrl, *rc.B)
                       : integrate_second_order(rc.energy(), *rc.A, *rc.B, eps, u0, v0, rc.t0, rc.t1, rc.ctrl);
    const LedgerCheck lc = check_ledger(tr);
    Json summary = trajectory_summary(tr, lc);
    summary["diagnostics"] = diagnostics_or_null(tr, rc);
    write_file_atomic(join(dir, "trajectory.csv"), trajectory_csv(tr));
    write_file_atomic(join(dir, "summary.json"), dump_json(summary));
    if (!opts.quiet)
        out << "simulate: " << tr.times.size() << " checkpoints, ledger residual " << lc.max_pair_residual
            << " (scale " << lc.scale << "), " << (lc.passed ? "ok" : "FAILED") << "; wrote " << dir << '\n';
    return lc.passed ? kExitOk : kExitFailed;
}

int cmd_sweep(const CommonOptions& opts, std::ostream& out) {
    const RunConfig rc = resolve_config(opts, false);
    const std::string dir = resolve_output_dir(opts, rc);
    const SweepConfig sc = rc.sweep();
    const std::vector<Trajectory> trajs = run_epsilon_sweep(sc);
    Json members = Json::array();
    Json bound = Json::object();
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const Trajectory& tr = trajs[i];
        const std::string file = eps_tag(i, tr.epsilon);
        write_file_atomic(join(dir, file), trajectory_csv(tr));
        Json m = trajectory_summary(tr, check_ledger(tr));
        m["file"] = file;
        m["diagnostics"] = diagnostics_or_null(tr, rc);
        if (m["diagnostics"].is_object())
            for (auto it = m["diagnostics"].begin(); it != m["diagnostics"].end(); ++it) {
                const double v = it.value().is_number() ? it.value().get<double>() : 0.0;
                if (!bound.contains(it.key()) || v > bound[it.key()].get<double>()) bound[it.key()] = v;
            }
        members.push_back(std::move(m));
    }
    Json doc{{"first_order", sc.first_order}, {"members", members}, {"diagnostics_bound", bound}};
    write_file_atomic(join(dir, "sweep.json"), dump_json(doc));
    if (!opts.quiet) out << "sweep: " << trajs.size() << " members, every ledger ok; wrote " << dir << '\n';
    return kExitOk;
}

int cmd_limit(const CommonOptions& opts, std::ostream& out) {
    const RunConfig rc = resolve_config(opts, false);
    const std::string dir = resolve_output_dir(opts, rc);
    const SweepConfig sc = rc.sweep();
    const std::vector<Trajectory> trajs = run_epsilon_sweep(sc);
    CertifyOptions cert = rc.certify;
    if (sc.first_order) cert.with_cost = false;
    const LimitReport report = certify_jumps(estimate_limit(trajs, rc.energy(), rc.limit), rc.energy(), *rc.A, *rc.B, cert);
    const BalanceReport balance = verify_energy_balance(report, rc.energy(), cert.balance_tol);
    Json doc = to_json(report);
    doc["balance"] = to_json(balance);
    Json jumps = Json::array();
    for (const JumpRecord& j : report.jumps) jumps.push_back(to_json(j));
    write_file_atomic(join(dir, "report.json"), dump_json(doc));
    write_file_atomic(join(dir, "limit.csv"), limit_csv(report));
    write_file_atomic(join(dir, "jumps.json"), dump_json(jumps));
    const bool ok = report.all_certified() && balance.passed();
    if (!opts.quiet) {
        out << "limit: " << report.jumps.size() << " jump(s)";
        for (const JumpRecord& j : report.jumps)
            out << "; t*=" << j.t_star << " u+=" << vec(j.u_plus).dump() << (j.certified ? " certified" : " NOT certified");
        out << "; balance " << (balance.passed() ? "ok" : "FAILED") << "; wrote " << dir << '\n';
    }
    return ok ? kExitOk : kExitFailed;
}

int cmd_critical_points(const CommonOptions& opts, double t, std::ostream& out) {
    const RunConfig rc = resolve_config(opts, true);
    const std::string dir = resolve_output_dir(opts, rc);
    const CriticalSearch found = find_critical_points(rc.energy(), t, rc.critical);
    Json arr = Json::array();
    for (const CriticalPoint& c : found.points)
        arr.push_back({{"location", vec(c.location)}, {"residual", c.residual}, {"eigs", vec(c.hess_eigs)},
                       {"kind", to_string(c.kind)}});
    write_file_atomic(join(dir, "critical_points.json"), dump_json(arr));
    out << dump_json(arr);
    return kExitOk;
}

int cmd_cost(const CommonOptions& opts, double t, const Vector& from, const Vector& to,
             const std::optional<std::string>& emit_path, std::ostream& out) {
    const RunConfig rc = resolve_config(opts, true);
    const std::string dir = resolve_output_dir(opts, rc);
    check_dim(from, rc, "--from");
    check_dim(to, rc, "--to");
    std::optional<std::string> target;
    if (emit_path) {
        const fs::path rel = fs::path(*emit_path).lexically_normal();
        if (rel.empty() || rel.is_absolute() || *rel.begin() == "..")
            config_error("--emit-path must stay inside the output directory: " + *emit_path);
        target = join(dir, rel.string());
    }
    const CostResult r = minimize_cost(rc.energy(), t, from, to, *rc.A, *rc.B, rc.cost);
    Json doc = to_json(r);
    doc["t"] = t;
    doc["from"] = vec(from);
    doc["to"] = vec(to);
    doc["energy_difference"] = rc.energy().eval(t, from) - rc.energy().eval(t, to);
    write_file_atomic(join(dir, "cost.json"), dump_json(doc));
    if (target) write_file_atomic(*target, path_csv(r.path));
    out << dump_json(doc);
    return kExitOk;
}

int cmd_heteroclinic(const CommonOptions& opts, double t, const Vector& from, bool first_order, std::ostream& out) {
    const RunConfig rc = resolve_config(opts, true);
    const std::string dir = resolve_output_dir(opts, rc);
    check_dim(from, rc, "--from");
    const Potential& p = rc.energy();
    Vector start = from;
    if (norm2(p.grad(t, start)) > 1e-9) start = newton_polish(p, t, start);
    const EquilibriumSpectrum sp =
        first_order ? linearize_first_order(p, t, start, *rc.B) : linearize_equilibrium(p, t, start, *rc.A, *rc.B);
    Json links = Json::array(), failures = Json::array();
    std::size_t k = 0;
    for (const Vector& d : candidate_directions(sp)) {
        try {
            const Heteroclinic h = first_order ? shoot_first_order(p, t, start, d, 1e-4, *rc.B)
                                               : shoot_heteroclinic(p, t, start, d, 1e-4, *rc.A, *rc.B);
            const std::string file = "heteroclinic_" + std::to_string(k++) + ".csv";
            write_file_atomic(join(dir, file), heteroclinic_csv(h));
            Json j = to_json(h);
            j["direction"] = vec(d);
            j["file"] = file;
            links.push_back(std::move(j));
        } catch (const Error& e) {
            failures.push_back({{"direction", vec(d)}, {"error", std::string(to_string(e.code()))}, {"message", e.what()}});
        }
    }
    Json doc{{"t", t},
             {"from", vec(start)},
             {"first_order", first_order},
             {"degenerate", sp.degenerate},
             {"hess_eigs", vec(sp.hess_eigs)},
             {"links", links},
             {"failed_directions", failures}};
    write_file_atomic(join(dir, "heteroclinic.json"), dump_json(doc));
    out << dump_json(doc);
    if (links.empty())
        throw Error(ErrorCode::NotDescent, failures.empty() ? "no unstable or neutral direction at the start point"
                                                            : "no heteroclinic leaves the start point");
    return kExitOk;
}

int cmd_appendix_demo(const CommonOptions& opts, std::ostream& out) {
    RunConfig rc = resolve_config(opts, true);
    const std::string dir = resolve_output_dir(opts, rc);
    const DemoResult d = run_appendix_demo(rc.cost);
    write_file_atomic(join(dir, "summary.json"), dump_json(d.summary));
    write_file_atomic(join(dir, "summary.txt"), d.text);
    write_file_atomic(join(dir, "heteroclinic_second_order.csv"), heteroclinic_csv(d.second_order_link));
    write_file_atomic(join(dir, "heteroclinic_first_order.csv"), heteroclinic_csv(d.first_order_link));
    write_file_atomic(join(dir, "limit_second_order.csv"), limit_csv(d.second_order));
    write_file_atomic(join(dir, "limit_first_order.csv"), limit_csv(d.first_order));
    if (!opts.quiet) out << d.text;
    return d.passed() ? kExitOk : kExitFailed;
}

int cmd_selftest(const CommonOptions& opts, SelftestOptions st, std::ostream& out) {
    if (opts.seed) st.seed = *opts.seed;
    const SelftestReport rep = run_selftest(st);
    if (!opts.quiet) out << rep.table();
    else
        for (const std::string& name : rep.failed()) out << "FAIL " << name << '\n';
    return rep.passed() ? kExitOk : kExitFailed;
}

}  // namespace bvlab
