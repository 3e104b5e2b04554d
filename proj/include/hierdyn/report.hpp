#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hierdyn/check.hpp"

namespace hierdyn::cli {

nlohmann::json to_json(const CheckReport& r);
nlohmann::json to_json(const Eigen::MatrixXd& m);
nlohmann::json to_json(const Eigen::VectorXd& v);

/// Outcome of one CLI command. The JSON form depends only on the problem,
/// the flags and the seed.
struct Report {
    std::string command;
    std::string problem;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();
    std::vector<CheckReport> checks;
    nlohmann::json results = nlohmann::json::object();
    std::vector<std::string> notes;

    /// Fail over Inconclusive over Pass; Pass when there are no checks.
    Verdict verdict() const;
    /// 0 pass, 1 fail, 3 inconclusive.
    int exit_code() const;
    nlohmann::json to_json() const;
    void write_summary(std::ostream& os) const;
};

}  // namespace hierdyn::cli
