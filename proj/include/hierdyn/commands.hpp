#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hierdyn/problem.hpp"
#include "hierdyn/report.hpp"

namespace hierdyn::cli {

/// Bad command line or a problem that lacks what the command needs (exit 2).
class UsageError : public Error {
public:
    using Error::Error;
};

struct RunFlags {
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<double> t_final;
    unsigned threads = 1;
    std::optional<std::string> report_path;
};

const std::vector<std::string>& command_names();

/// Applies the flag overrides to a loaded problem.
void apply_flags(ProblemFile& problem, const RunFlags& flags);

/// Runs one command on a problem whose overrides are already applied.
Report execute(const std::string& command, const ProblemFile& problem, unsigned threads = 1);

/// Loads the problem, executes the command, prints the JSON report to `out`
/// and a summary to `err`. Returns the process exit code.
int run(const std::string& command, const std::string& problem_path, const RunFlags& flags, std::ostream& out,
        std::ostream& err);

}  // namespace hierdyn::cli
