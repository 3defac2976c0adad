#include "bvlab/config.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "bvlab/error.hpp"

namespace bvlab {

namespace {

const char* const kSchemaText =
#include "bvlab_schema.inc"
    ;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

class Validator {
public:
    explicit Validator(const Json& root) : root_(root) {}

    void check(const Json& value, const Json& schema, const std::string& where, std::vector<std::string>& out) const {
        if (schema.contains("$ref")) {
            check(value, resolve(schema["$ref"].get<std::string>()), where, out);
            return;
        }
        if (schema.contains("oneOf")) {
            one_of(value, schema["oneOf"], where, out);
            return;
        }
        if (schema.contains("const") && value != schema["const"]) {
            out.push_back(at(where) + "must equal " + schema["const"].dump());
            return;
        }
        if (schema.contains("enum")) {
            bool found = false;
            for (const Json& e : schema["enum"]) found = found || value == e;
            if (!found) out.push_back(at(where) + "must be one of " + schema["enum"].dump());
        }
        if (schema.contains("type") && !type_matches(value, schema["type"].get<std::string>())) {
            out.push_back(at(where) + "must be of type " + schema["type"].get<std::string>());
            return;
        }
        if (value.is_number()) numeric(value.get<double>(), schema, where, out);
        if (value.is_string() && schema.contains("minLength") &&
            value.get<std::string>().size() < schema["minLength"].get<std::size_t>())
            out.push_back(at(where) + "is too short");
        if (value.is_string() && schema.contains("pattern") &&
            !std::regex_search(value.get<std::string>(), std::regex(schema["pattern"].get<std::string>())))
            out.push_back(at(where) + "must match " + schema["pattern"].dump());
        if (value.is_array()) array(value, schema, where, out);
        if (value.is_object()) object(value, schema, where, out);
    }

private:
    static std::string at(const std::string& where) { return (where.empty() ? std::string("/") : where) + ": "; }

    const Json& resolve(const std::string& ref) const {
        if (ref.rfind("#/", 0) != 0) throw Error(ErrorCode::ConfigError, "unsupported schema reference " + ref);
        return root_.at(Json::json_pointer(ref.substr(1)));
    }

    static bool type_matches(const Json& v, const std::string& type) {
        if (type == "object") return v.is_object();
        if (type == "array") return v.is_array();
        if (type == "string") return v.is_string();
        if (type == "boolean") return v.is_boolean();
        if (type == "number") return v.is_number();
        if (type == "integer") {
            if (v.is_number_integer()) return true;
            return v.is_number_float() && std::floor(v.get<double>()) == v.get<double>();
        }
        if (type == "null") return v.is_null();
        return false;
    }

    static void numeric(double x, const Json& schema, const std::string& where, std::vector<std::string>& out) {
        if (schema.contains("minimum") && x < schema["minimum"].get<double>())
            out.push_back(at(where) + "must be >= " + schema["minimum"].dump());
        if (schema.contains("maximum") && x > schema["maximum"].get<double>())
            out.push_back(at(where) + "must be <= " + schema["maximum"].dump());
        if (schema.contains("exclusiveMinimum") && !(x > schema["exclusiveMinimum"].get<double>()))
            out.push_back(at(where) + "must be > " + schema["exclusiveMinimum"].dump());
    }

    void array(const Json& v, const Json& schema, const std::string& where, std::vector<std::string>& out) const {
        if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>())
            out.push_back(at(where) + "needs at least " + schema["minItems"].dump() + " items");
        if (schema.contains("maxItems") && v.size() > schema["maxItems"].get<std::size_t>())
            out.push_back(at(where) + "allows at most " + schema["maxItems"].dump() + " items");
        if (schema.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i) check(v[i], schema["items"], where + "/" + std::to_string(i), out);
    }

    void object(const Json& v, const Json& schema, const std::string& where, std::vector<std::string>& out) const {
        const Json empty = Json::object();
        const Json& props = schema.contains("properties") ? schema["properties"] : empty;
        if (schema.contains("required"))
            for (const Json& r : schema["required"])
                if (!v.contains(r.get<std::string>()))
                    out.push_back(at(where) + "missing required key '" + r.get<std::string>() + "'");
        const bool closed = schema.contains("additionalProperties") && schema["additionalProperties"] == false;
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (props.contains(it.key())) check(it.value(), props[it.key()], where + "/" + it.key(), out);
            else if (closed) out.push_back(at(where) + "unknown key '" + it.key() + "'");
        }
    }

    void one_of(const Json& v, const Json& options, const std::string& where, std::vector<std::string>& out) const {
        std::vector<std::vector<std::string>> errs;
        std::size_t matches = 0;
        for (const Json& alt : options) {
            errs.emplace_back();
            check(v, alt, where, errs.back());
            if (errs.back().empty()) ++matches;
        }
        if (matches == 1) return;
        if (matches > 1) {
            out.push_back(at(where) + "matches more than one alternative");
            return;
        }
        // report the alternative that came closest
        std::size_t best = 0;
        for (std::size_t i = 1; i < errs.size(); ++i)
            if (errs[i].size() < errs[best].size()) best = i;
        // an alternative selected by a matching "kind" wins over a shorter error list
        if (v.is_object() && v.contains("kind"))
            for (std::size_t i = 0; i < options.size(); ++i) {
                const Json& alt = options[i];
                if (alt.contains("properties") && alt["properties"].contains("kind") &&
                    alt["properties"]["kind"].value("const", Json()) == v["kind"])
                    best = i;
            }
        out.insert(out.end(), errs[best].begin(), errs[best].end());
    }

    const Json& root_;
};

Vector numbers(const Json& j) { return j.get<std::vector<double>>(); }

SpdMatrix spd_from(const Json& j, std::size_t dim, const char* name) {
    try {
        if (j.is_number()) return SpdMatrix::scalar(dim, j.get<double>());
        if (j.is_string()) {
            const std::string text = j.get<std::string>();
            if (text == "identity") return SpdMatrix::scalar(dim, 1.0);
            return SpdMatrix::scalar(dim, std::stod(text.substr(text.find(':') + 1)));
        }
        const auto rows = j.get<std::vector<std::vector<double>>>();
        if (rows.size() != dim) config_error(std::string(name) + " must be " + std::to_string(dim) + "x" + std::to_string(dim));
        Vector flat;
        for (const auto& r : rows) {
            if (r.size() != dim) config_error(std::string(name) + " must be square");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return SpdMatrix::from_entries(dim, flat);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        config_error(std::string(name) + ": " + e.what());
    }
}

std::optional<Box> box_from(const Json& p) {
    if (!p.contains("box")) return std::nullopt;
    Box b{numbers(p["box"]["lower"]), numbers(p["box"]["upper"])};
    if (b.lower.size() != b.upper.size()) config_error("potential box bounds differ in dimension");
    for (std::size_t i = 0; i < b.lower.size(); ++i)
        if (!(b.lower[i] < b.upper[i])) config_error("potential box must have lower < upper");
    return b;
}

template <class T>
void take(const Json& block, const char* key, T& field) {
    if (block.contains(key)) field = block[key].get<T>();
}

}  // namespace

const Json& run_config_schema() {
    static const Json schema = Json::parse(kSchemaText);
    return schema;
}

std::vector<std::string> schema_errors(const Json& instance, const Json& schema) {
    std::vector<std::string> out;
    Validator(schema).check(instance, schema, "", out);
    return out;
}

SweepConfig RunConfig::sweep() const {
    if (epsilons.empty()) config_error("a sweep needs an 'epsilons' list");
    SweepConfig sc(*potential, *A, *B);
    sc.epsilons = epsilons;
    sc.t0 = t0;
    sc.t1 = t1;
    sc.u0 = u0;
    sc.u0_slope = u0_slope;
    sc.v0 = v0;
    sc.first_order = first_order;
    sc.ctrl = ctrl;
    sc.validate();
    return sc;
}

RunConfig parse_run_config(const Json& doc) {
    if (!doc.is_object()) config_error("the config must be a JSON object");
    const std::vector<std::string> errs = schema_errors(doc, run_config_schema());
    if (!errs.empty()) {
        std::ostringstream o;
        o << "config does not match the schema:";
        for (const std::string& e : errs) o << "\n  " << e;
        config_error(o.str());
    }

    RunConfig rc;
    const Json& pj = doc["potential"];
    rc.potential_kind = pj["kind"].get<std::string>();
    if (doc.contains("span")) {
        rc.t0 = doc["span"]["t0"].get<double>();
        rc.t1 = doc["span"]["t1"].get<double>();
        if (!(rc.t1 > rc.t0)) config_error("span needs t1 > t0");
    } else if (rc.potential_kind != "appendix") {
        rc.t0 = 0.0;
        rc.t1 = 2.0;
    }

    double a_default = 1.0, b_default = 1.0;
    try {
        if (rc.potential_kind == "appendix") {
            take(pj, "eta", rc.eta);
            rc.potential = make_appendix(rc.eta).potential;
            b_default = 0.25;
            const double r = std::sqrt(1.0 / 3.0);
            rc.u0 = {-r};
            rc.u0_slope = {-r};
            rc.v0 = {1.0};
        } else if (rc.potential_kind == "quadratic") {
            std::vector<Polynomial> load;
            const Json& lj = pj["load"];
            if (lj.is_string()) load.push_back(Polynomial{{0.0, 1.0}});
            else if (lj[0].is_number()) load.push_back(Polynomial{numbers(lj)});
            else
                for (const Json& c : lj) load.push_back(Polynomial{numbers(c)});
            const std::size_t dim = load.size();
            rc.potential = make_quadratic(dim, load, box_from(pj), rc.t0, rc.t1);
            for (const Polynomial& l : load) rc.u0.push_back(l(rc.t0));
            rc.v0.assign(dim, 0.0);
        } else {
            CustomSplineSpec s;
            s.knots = numbers(pj["knots"]);
            s.values = numbers(pj["values"]);
            s.first = numbers(pj["first"]);
            s.second = numbers(pj["second"]);
            if (pj.contains("third")) s.third = numbers(pj["third"]);
            take(pj, "growth", s.growth);
            take(pj, "tilt_rate", s.tilt_rate);
            take(pj, "tilt_reference", s.tilt_reference);
            s.box = box_from(pj);
            s.t0 = rc.t0;
            s.t1 = rc.t1;
            rc.potential = make_custom_spline(s);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        config_error(std::string("potential: ") + e.what());
    }
    const std::size_t dim = rc.potential->dim();
    if (auto box = box_from(pj); box && box->dim() != dim) config_error("potential box dimension differs from the load");

    rc.A = doc.contains("A") ? spd_from(doc["A"], dim, "A") : SpdMatrix::scalar(dim, a_default);
    rc.B = doc.contains("B") ? spd_from(doc["B"], dim, "B") : SpdMatrix::scalar(dim, b_default);

    if (doc.contains("epsilon")) rc.epsilon = doc["epsilon"].get<double>();
    take(doc, "epsilons", rc.epsilons);
    take(doc, "first_order", rc.first_order);

    if (doc.contains("initial")) {
        const Json& in = doc["initial"];
        if (in.contains("u0")) {
            rc.u0 = numbers(in["u0"]);
            // explicit data replace the appendix family unless given too
            if (!in.contains("u0_slope")) rc.u0_slope.clear();
            if (!in.contains("v0")) rc.v0.assign(rc.u0.size(), 0.0);
        }
        if (in.contains("u0_slope")) rc.u0_slope = numbers(in["u0_slope"]);
        if (in.contains("v0")) rc.v0 = numbers(in["v0"]);
    }
    if (rc.u0.empty()) config_error("initial.u0 is required for this potential");
    if (rc.u0.size() != dim) config_error("initial.u0 has dimension " + std::to_string(rc.u0.size()) + ", the potential " + std::to_string(dim));
    if (!rc.u0_slope.empty() && rc.u0_slope.size() != dim) config_error("initial.u0_slope dimension mismatch");
    if (!rc.v0.empty() && rc.v0.size() != dim) config_error("initial.v0 dimension mismatch");

    if (doc.contains("ctrl")) {
        const Json& c = doc["ctrl"];
        take(c, "rtol", rc.ctrl.rtol);
        take(c, "atol", rc.ctrl.atol);
        take(c, "step_cap", rc.ctrl.step_cap);
        take(c, "min_step", rc.ctrl.min_step);
        take(c, "checkpoints_per_unit", rc.ctrl.checkpoints_per_unit);
        take(c, "max_steps", rc.ctrl.max_steps);
    }
    take(doc, "output_dir", rc.output_dir);
    take(doc, "seed", rc.seed);
    if (doc.contains("critical")) {
        const Json& c = doc["critical"];
        take(c, "grid_per_axis", rc.critical.grid_per_axis);
        take(c, "tol_crit", rc.critical.tol_crit);
        take(c, "tol_degenerate", rc.critical.tol_degenerate);
    }
    if (doc.contains("cost")) {
        const Json& c = doc["cost"];
        take(c, "schedule", rc.cost.schedule);
        take(c, "max_N", rc.cost.max_N);
        take(c, "extend_tol", rc.cost.extend_tol);
        take(c, "nodes_per_unit", rc.cost.nodes_per_unit);
        take(c, "random_restarts", rc.cost.random_restarts);
        take(c, "chain_seeds", rc.cost.chain_seeds);
        take(c, "richardson", rc.cost.richardson);
        take(c, "opt_tol", rc.cost.opt_tol);
        take(c, "max_iter", rc.cost.max_iter);
        take(c, "refine_max_iter", rc.cost.refine_max_iter);
    }
    rc.cost.seed = rc.seed;
    if (doc.contains("limit")) {
        const Json& l = doc["limit"];
        take(l, "agree_cap", rc.limit.agree_cap);
        take(l, "attach_radius", rc.limit.attach_radius);
        if (l.contains("jump_threshold")) rc.limit.jump_threshold = l["jump_threshold"].get<double>();
        take(l, "atom_fraction", rc.limit.atom_fraction);
        take(l, "window_cells", rc.limit.window_cells);
        take(l, "relax_fraction", rc.limit.relax_fraction);
        take(l, "settle_cells", rc.limit.settle_cells);
        take(l, "max_disagreement", rc.limit.max_disagreement);
        take(l, "stab_tol", rc.limit.stab_tol);
        take(l, "balance_tol", rc.certify.balance_tol);
        take(l, "identity_rel_tol", rc.certify.identity_rel_tol);
        take(l, "with_cost", rc.certify.with_cost);
    }
    rc.certify.cost = rc.cost;
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot read config file " + path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::exception& e) {
        config_error(path + ": " + e.what());
    }
    return parse_run_config(doc);
}

}  // namespace bvlab
