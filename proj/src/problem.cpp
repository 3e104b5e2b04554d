#include "hierdyn/problem.hpp"

#include <cmath>
#include <fstream>

#include "problem_schema.hpp"

namespace hierdyn::cli {

using nlohmann::json;

SchemaError::SchemaError(const std::string& path, const std::string& message)
    : Error((path.empty() ? "/" : path) + ": " + message), path_(path.empty() ? "/" : path)
{
}

namespace {

bool has_type(const json& doc, const std::string& type)
{
    if (type == "object") return doc.is_object();
    if (type == "array") return doc.is_array();
    if (type == "string") return doc.is_string();
    if (type == "number") return doc.is_number();
    if (type == "integer") return doc.is_number_integer();
    if (type == "boolean") return doc.is_boolean();
    if (type == "null") return doc.is_null();
    return false;
}

void validate_node(const json& doc, const json& schema, const json& root, const std::string& path)
{
    if (auto ref = schema.find("$ref"); ref != schema.end()) {
        const std::string target = ref->get<std::string>();
        if (target.rfind("#", 0) != 0) throw Error("schema: only local $ref is supported");
        validate_node(doc, root.at(json::json_pointer(target.substr(1))), root, path);
        return;
    }
    if (auto type = schema.find("type"); type != schema.end()) {
        bool ok = false;
        std::string names;
        if (type->is_array()) {
            for (const auto& t : *type) {
                ok = ok || has_type(doc, t.get<std::string>());
                names += (names.empty() ? "" : " or ") + t.get<std::string>();
            }
        } else {
            names = type->get<std::string>();
            ok = has_type(doc, names);
        }
        if (!ok) throw SchemaError(path, "expected " + names + ", got " + doc.type_name());
    }
    if (auto en = schema.find("enum"); en != schema.end()) {
        bool found = false;
        for (const auto& v : *en) found = found || v == doc;
        if (!found) throw SchemaError(path, "value " + doc.dump() + " is not one of " + en->dump());
    }
    if (doc.is_object()) {
        if (auto req = schema.find("required"); req != schema.end()) {
            for (const auto& key : *req) {
                if (!doc.contains(key.get<std::string>()))
                    throw SchemaError(path, "missing required field \"" + key.get<std::string>() + "\"");
            }
        }
        const json* props = schema.contains("properties") ? &schema.at("properties") : nullptr;
        bool closed = schema.contains("additionalProperties") && schema.at("additionalProperties") == false;
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            const std::string child = path + "/" + it.key();
            if (props && props->contains(it.key())) {
                validate_node(it.value(), props->at(it.key()), root, child);
            } else if (closed) {
                throw SchemaError(child, "unknown field");
            }
        }
    }
    if (doc.is_array()) {
        if (auto mi = schema.find("minItems"); mi != schema.end() && doc.size() < mi->get<std::size_t>())
            throw SchemaError(path, "expected at least " + std::to_string(mi->get<std::size_t>()) + " items");
        if (auto ma = schema.find("maxItems"); ma != schema.end() && doc.size() > ma->get<std::size_t>())
            throw SchemaError(path, "expected at most " + std::to_string(ma->get<std::size_t>()) + " items");
        if (auto items = schema.find("items"); items != schema.end()) {
            for (std::size_t i = 0; i < doc.size(); ++i)
                validate_node(doc[i], *items, root, path + "/" + std::to_string(i));
        }
    }
    if (doc.is_string()) {
        if (auto ml = schema.find("minLength");
            ml != schema.end() && doc.get<std::string>().size() < ml->get<std::size_t>())
            throw SchemaError(path, "string is too short");
    }
    if (doc.is_number()) {
        double v = doc.get<double>();
        if (auto mn = schema.find("minimum"); mn != schema.end() && v < mn->get<double>())
            throw SchemaError(path, "value must be at least " + mn->dump());
        if (auto ex = schema.find("exclusiveMinimum"); ex != schema.end() && !(v > ex->get<double>()))
            throw SchemaError(path, "value must be greater than " + ex->dump());
    }
}

// Runs f, reporting library errors as schema errors at `path`.
template <typename F>
auto at_path(const std::string& path, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const SchemaError&) {
        throw;
    } catch (const Error& e) {
        throw SchemaError(path, e.what());
    }
}

std::vector<std::string> strings(const json& a) { return a.get<std::vector<std::string>>(); }

// Parses an array of expression strings, reporting errors at the offending entry.
VectorField field_at(const json& a, const SymbolList& coords, const std::string& path)
{
    std::vector<ScalarExpr> comps;
    for (std::size_t i = 0; i < a.size(); ++i)
        comps.push_back(
            at_path(path + "/" + std::to_string(i), [&] { return parse(a[i].get<std::string>(), coords); }));
    return at_path(path, [&] { return VectorField(coords, std::move(comps)); });
}

Eigen::VectorXd vec(const json& a, std::size_t expected, const std::string& path)
{
    if (a.size() != expected)
        throw SchemaError(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(a.size()));
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

Eigen::MatrixXd matrix(const json& a, const std::string& path)
{
    const std::size_t rows = a.size(), cols = a[0].size();
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        M.row(static_cast<Eigen::Index>(i)) = vec(a[i], cols, path + "/" + std::to_string(i)).transpose();
    }
    return M;
}

void expect_count(std::size_t got, std::size_t want, const std::string& path, const std::string& what)
{
    if (got != want)
        throw SchemaError(path, "expected " + std::to_string(want) + " " + what + ", got " + std::to_string(got));
}

Domain box(const json& d, std::size_t m, const std::string& path)
{
    return at_path(path, [&] { return Domain(vec(d["lo"], m, path + "/lo"), vec(d["hi"], m, path + "/hi")); });
}

}  // namespace

void validate_against(const json& doc, const json& schema) { validate_node(doc, schema, schema, ""); }

const json& problem_schema()
{
    static const json schema = json::parse(detail::kProblemSchema);
    return schema;
}

void Tolerances::override_all(double tol) { zero = closure = fiber = diagram = linear = quotient = tol; }

ProblemFile parse_problem(const json& doc)
{
    validate_against(doc, problem_schema());
    ProblemFile p;
    p.name = doc.value("name", std::string());
    p.coords = strings(doc["coords"]);
    const std::size_t m = p.coords.size();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (p.coords[i] == p.coords[j]) throw SchemaError("/coords/" + std::to_string(i), "duplicate coordinate");
        }
    }

    if (doc.contains("vector_field")) {
        expect_count(doc["vector_field"].size(), m, "/vector_field", "components");
        p.vector_field = field_at(doc["vector_field"], p.coords, "/vector_field");
    }
    if (doc.contains("generators")) {
        std::vector<VectorField> gens;
        for (std::size_t i = 0; i < doc["generators"].size(); ++i) {
            const std::string path = "/generators/" + std::to_string(i);
            expect_count(doc["generators"][i].size(), m, path, "components");
            gens.push_back(field_at(doc["generators"][i], p.coords, path));
        }
        p.generators = LieBasis(p.coords, std::move(gens));
    }
    if (doc.contains("projection")) {
        const json& pj = doc["projection"];
        auto comps = strings(pj["components"]);
        SymbolList target;
        if (pj.contains("target_coords")) {
            target = strings(pj["target_coords"]);
            expect_count(target.size(), comps.size(), "/projection/target_coords", "names");
        } else {
            for (std::size_t i = 0; i < comps.size(); ++i) target.push_back("p" + std::to_string(i + 1));
        }
        if (comps.size() > m)
            throw SchemaError("/projection/components", "projection has more components than coordinates");
        std::vector<bool> angular;
        if (pj.contains("angular")) {
            angular = pj["angular"].get<std::vector<bool>>();
            expect_count(angular.size(), comps.size(), "/projection/angular", "flags");
        }
        std::vector<std::string> guards = pj.contains("guards") ? strings(pj["guards"]) : std::vector<std::string>{};
        p.projection =
            at_path("/projection", [&] { return ProjectionMap::parse(p.coords, target, comps, guards, angular); });
    }
    if (doc.contains("reduced_field")) {
        if (!p.projection) throw SchemaError("/reduced_field", "a reduced field needs a projection");
        expect_count(doc["reduced_field"].size(), p.projection->target_dimension(), "/reduced_field", "components");
        p.reduced_field = field_at(doc["reduced_field"], p.projection->target_coords(), "/reduced_field");
    }
    if (doc.contains("first_integral")) {
        p.first_integral =
            at_path("/first_integral", [&] { return parse(doc["first_integral"].get<std::string>(), p.coords); });
    }
    if (doc.contains("sections")) {
        for (std::size_t i = 0; i < doc["sections"].size(); ++i) {
            const std::string path = "/sections/" + std::to_string(i);
            const json& sj = doc["sections"][i];
            auto names = sj.contains("chart_names") ? strings(sj["chart_names"]) : SymbolList{};
            auto guards = sj.contains("guards") ? strings(sj["guards"]) : std::vector<std::string>{};
            auto angular = sj.contains("angular") ? sj["angular"].get<std::vector<bool>>() : std::vector<bool>{};
            CrossSection sec = at_path(path, [&] {
                return CrossSection::parse(p.coords, strings(sj["constraints"]), strings(sj["chart"]), names, guards,
                                           angular);
            });
            if (sj.contains("validity")) sec.validity = box(sj["validity"], m, path + "/validity");
            if (p.generators && !sec.constraints.empty() && sec.constraints.size() != p.generators->size())
                throw SchemaError(path + "/constraints", "expected one constraint per generator");
            p.sections.push_back(std::move(sec));
        }
    }
    if (doc.contains("matrix")) {
        const json& mj = doc["matrix"];
        Eigen::MatrixXd A = matrix(mj["A"], "/matrix/A");
        if (A.rows() != static_cast<Eigen::Index>(m) || A.cols() != static_cast<Eigen::Index>(m))
            throw SchemaError("/matrix/A", "expected a " + std::to_string(m) + "x" + std::to_string(m) + " matrix");
        p.A = A;
        if (mj.contains("P")) {
            Eigen::MatrixXd P = matrix(mj["P"], "/matrix/P");
            if (P.cols() != static_cast<Eigen::Index>(m))
                throw SchemaError("/matrix/P", "expected " + std::to_string(m) + " columns");
            p.P = P;
        }
    }
    if (doc.contains("domain")) {
        const json& dj = doc["domain"];
        p.domain = box(dj, m, "/domain");
        if (dj.contains("exclude")) {
            for (std::size_t i = 0; i < dj["exclude"].size(); ++i) {
                const std::string path = "/domain/exclude/" + std::to_string(i);
                p.domain.excluded.push_back(
                    {vec(dj["exclude"][i]["center"], m, path + "/center"), dj["exclude"][i]["radius"].get<double>()});
            }
        }
    } else {
        p.domain = Domain::cube(static_cast<Eigen::Index>(m), -2.0, 2.0);
    }
    if (doc.contains("initial_conditions")) {
        for (std::size_t i = 0; i < doc["initial_conditions"].size(); ++i)
            p.initial_conditions.push_back(
                vec(doc["initial_conditions"][i], m, "/initial_conditions/" + std::to_string(i)));
    }
    p.seed = doc.value("seed", std::uint64_t{0});
    p.samples = doc.value("samples", std::size_t{128});
    p.fibers = doc.value("fibers", std::size_t{16});
    p.t_final = doc.value("t_final", 5.0);
    if (doc.contains("tolerances")) {
        const json& tj = doc["tolerances"];
        p.tolerances.zero = tj.value("zero", p.tolerances.zero);
        p.tolerances.closure = tj.value("closure", p.tolerances.closure);
        p.tolerances.fiber = tj.value("fiber", p.tolerances.fiber);
        p.tolerances.diagram = tj.value("diagram", p.tolerances.diagram);
        p.tolerances.linear = tj.value("linear", p.tolerances.linear);
        p.tolerances.quotient = tj.value("quotient", p.tolerances.quotient);
    }
    if (doc.contains("integrator")) {
        const json& ij = doc["integrator"];
        if (ij.contains("method"))
            p.integrator.method = ij["method"] == "rk4" ? IntegratorMethod::RK4 : IntegratorMethod::RK45;
        p.integrator.rel_tol = ij.value("rel_tol", p.integrator.rel_tol);
        p.integrator.abs_tol = ij.value("abs_tol", p.integrator.abs_tol);
        p.integrator.max_step = ij.value("max_step", p.integrator.max_step);
        p.integrator.max_steps = ij.value("max_steps", p.integrator.max_steps);
        at_path("/integrator", [&] {
            p.integrator.validate();
            return 0;
        });
    }
    return p;
}

ProblemFile load_problem(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open problem file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("/", std::string("invalid JSON: ") + e.what());
    }
    return parse_problem(doc);
}

json config_echo(const ProblemFile& p)
{
    json tol = {{"zero", p.tolerances.zero},     {"closure", p.tolerances.closure},
                {"fiber", p.tolerances.fiber},   {"diagram", p.tolerances.diagram},
                {"linear", p.tolerances.linear}, {"quotient", p.tolerances.quotient}};
    json integ = {{"method", p.integrator.method == IntegratorMethod::RK4 ? "rk4" : "rk45"},
                  {"rel_tol", p.integrator.rel_tol},
                  {"abs_tol", p.integrator.abs_tol},
                  {"max_step", std::isfinite(p.integrator.max_step) ? json(p.integrator.max_step) : json(nullptr)},
                  {"max_steps", p.integrator.max_steps}};
    return {{"name", p.name},       {"coords", p.coords}, {"samples", p.samples}, {"fibers", p.fibers},
            {"t_final", p.t_final}, {"tolerances", tol},  {"integrator", integ}};
}

}  // namespace hierdyn::cli
