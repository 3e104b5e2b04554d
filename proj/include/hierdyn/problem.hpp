#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hierdyn/flow.hpp"
#include "hierdyn/quotient.hpp"
#include "hierdyn/vector_field.hpp"

namespace hierdyn::cli {

/// A problem file failed validation; `path` is a JSON pointer to the field.
class SchemaError : public Error {
public:
    SchemaError(const std::string& path, const std::string& message);
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Checks `doc` against a JSON schema. Supports the keywords used by the
/// shipped problem schema: type, enum, required, properties,
/// additionalProperties, items, minItems, maxItems, minLength, minimum,
/// exclusiveMinimum and local $ref.
void validate_against(const nlohmann::json& doc, const nlohmann::json& schema);

/// The shipped problem-file schema.
const nlohmann::json& problem_schema();

struct Tolerances {
    double zero = 1e-9;
    double closure = 1e-9;
    double fiber = 1e-8;
    double diagram = 1e-6;
    double linear = 1e-8;
    double quotient = 1e-6;

    void override_all(double tol);
};

struct ProblemFile {
    std::string name;
    SymbolList coords;
    std::optional<VectorField> vector_field;
    std::optional<LieBasis> generators;
    std::optional<ProjectionMap> projection;
    std::optional<VectorField> reduced_field;
    std::optional<ScalarExpr> first_integral;
    std::vector<CrossSection> sections;
    std::optional<Eigen::MatrixXd> A;
    std::optional<Eigen::MatrixXd> P;
    Domain domain;
    std::vector<Eigen::VectorXd> initial_conditions;
    std::uint64_t seed = 0;
    std::size_t samples = 128;
    std::size_t fibers = 16;
    double t_final = 5.0;
    Tolerances tolerances;
    IntegratorConfig integrator;
};

/// Schema-validates and builds a problem, checking dimensional consistency.
/// Parse errors in expressions are reported as SchemaError with the field path.
ProblemFile parse_problem(const nlohmann::json& doc);
ProblemFile load_problem(const std::string& path);

/// The problem's settings as written into reports.
nlohmann::json config_echo(const ProblemFile& p);

}  // namespace hierdyn::cli
