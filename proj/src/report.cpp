#include "hierdyn/report.hpp"

#include <ostream>

#ifndef HIERDYN_VERSION
#define HIERDYN_VERSION "0.0.0"
#endif

namespace hierdyn::cli {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json to_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
    return rows;
}

json to_json(const CheckReport& r)
{
    return {{"name", r.name},
            {"verdict", to_string(r.verdict)},
            {"method", to_string(r.method)},
            {"max_residual", r.max_residual},
            {"witness", r.witness ? to_json(*r.witness) : json(nullptr)},
            {"details", r.details}};
}

Verdict Report::verdict() const
{
    Verdict v = Verdict::Pass;
    for (const auto& c : checks) v = worst(v, c.verdict);
    return v;
}

int Report::exit_code() const
{
    switch (verdict()) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 1;
    case Verdict::Inconclusive: return 3;
    }
    return 3;
}

json Report::to_json() const
{
    json checks_json = json::array();
    std::size_t pass = 0, fail = 0, inconclusive = 0;
    for (const auto& c : checks) {
        checks_json.push_back(cli::to_json(c));
        pass += c.verdict == Verdict::Pass;
        fail += c.verdict == Verdict::Fail;
        inconclusive += c.verdict == Verdict::Inconclusive;
    }
    return {{"tool", "hierdyn"},
            {"version", HIERDYN_VERSION},
            {"command", command},
            {"problem", problem},
            {"seed", seed},
            {"config", config},
            {"checks", checks_json},
            {"results", results},
            {"notes", notes},
            {"summary",
             {{"verdict", to_string(verdict())},
              {"exit_code", exit_code()},
              {"pass", pass},
              {"fail", fail},
              {"inconclusive", inconclusive}}}};
}

void Report::write_summary(std::ostream& os) const
{
    os << "hierdyn " << command << ": " << problem << '\n';
    auto old = os.precision(3);
    for (const auto& c : checks) {
        os << "  " << c.name << ": " << to_string(c.verdict) << " (" << to_string(c.method) << ", residual "
           << c.max_residual << ")";
        if (!c.details.empty()) os << " - " << c.details;
        os << '\n';
    }
    for (const auto& n : notes) os << "  note: " << n << '\n';
    os.precision(old);
    os << "result: " << to_string(verdict()) << " (exit " << exit_code() << ")\n";
}

}  // namespace hierdyn::cli
