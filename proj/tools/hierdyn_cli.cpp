// Command-line front end: hierdyn <command> <problem.json> [flags]

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "hierdyn/commands.hpp"

namespace {

struct Invocation {
    std::string problem;
    double tol = 0;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    double t_final = 0;
    unsigned threads = 1;
    std::string report;
    std::string csv;
};

void add_common(CLI::App* sub, Invocation& inv)
{
    sub->add_option("problem", inv.problem, "Problem file (JSON)")->required();
    sub->add_option("--tol", inv.tol, "Override every check tolerance");
    sub->add_option("--seed", inv.seed, "Sampling seed");
    sub->add_option("--samples", inv.samples, "Number of sample points");
    sub->add_option("--t-final", inv.t_final, "Integration horizon");
    sub->add_option("--threads", inv.threads, "Worker threads (0 = hardware concurrency)");
    sub->add_option("--report", inv.report, "Also write the JSON report to this path");
}

hierdyn::cli::RunFlags flags_from(const CLI::App* sub, const Invocation& inv)
{
    hierdyn::cli::RunFlags f;
    if (sub->count("--tol")) f.tol = inv.tol;
    if (sub->count("--seed")) f.seed = inv.seed;
    if (sub->count("--samples")) f.samples = inv.samples;
    if (sub->count("--t-final")) f.t_final = inv.t_final;
    f.threads = inv.threads;
    if (sub->count("--report")) f.report_path = inv.report;
    return f;
}

int run_trajectory(const Invocation& inv, const hierdyn::cli::RunFlags& flags)
{
    try {
        auto problem = hierdyn::cli::load_problem(inv.problem);
        hierdyn::cli::apply_flags(problem, flags);
        if (!problem.vector_field) throw hierdyn::cli::UsageError("the problem defines no vector_field");
        if (problem.initial_conditions.empty())
            throw hierdyn::cli::UsageError("the problem defines no initial_conditions");
        auto traj = hierdyn::integrate(*problem.vector_field, problem.initial_conditions.front(), 0.0, problem.t_final,
                                       problem.integrator, hierdyn::checkpoints(problem.t_final));
        traj.write_csv(std::cout);
        return 0;
    } catch (const hierdyn::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

const std::map<std::string, std::string> kDescriptions = {
    {"check-symmetry", "Check that every generator commutes with the vector field"},
    {"check-closure", "Check that the generators close under the Lie bracket"},
    {"check-invariance", "Check that the projection is constant along every generator"},
    {"check-fibers", "Integrate fiber mates and check that their images stay together"},
    {"verify-diagram", "Compare the projected flow against the reduced flow"},
    {"classify", "Classify the projection as trivial or nontrivial dynamics"},
    {"reduce-linear", "Enumerate invariant subspaces of the linear part and their reductions"},
    {"quotient-build", "Canonicalize sample points onto each cross-section"},
    {"quotient-verify", "Check orbit constancy, idempotence and chart overlaps of the quotient"},
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Symmetry-based reduction checks for vector fields"};
    app.require_subcommand(1);
    app.set_version_flag("--version", HIERDYN_VERSION_STRING);

    Invocation inv;
    std::vector<std::pair<std::string, CLI::App*>> subs;
    for (const auto& name : hierdyn::cli::command_names()) {
        auto* sub = app.add_subcommand(name, kDescriptions.at(name));
        add_common(sub, inv);
        subs.emplace_back(name, sub);
    }
    auto* traj = app.add_subcommand("trajectory", "Integrate from the first initial condition and print CSV");
    add_common(traj, inv);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (traj->parsed()) return run_trajectory(inv, flags_from(traj, inv));
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) return hierdyn::cli::run(name, inv.problem, flags_from(sub, inv), std::cout, std::cerr);
    }
    return 2;
}
