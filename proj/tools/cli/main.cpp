#include "ringfc_app/app.hpp"
#include "ringfc_app/csv.hpp"
#include "ringfc_app/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace ringfc::app;

int main(int argc, char** argv)
{
    CLI::App cli{"Coupled-ring frequency conversion toolkit"};
    cli.footer("CSV schemas:\n" + describe_schemas() + "\nExit codes: 0 ok, 1 other, 2 validation, 3 convergence, 4 io");
    cli.require_subcommand(1, 1);
    cli.fallthrough();

    GlobalOptions g;
    std::string config, out_dir = ".";
    std::uint64_t seed = 0;
    double tolerance = 0.0;
    auto* copt = cli.add_option("--config", config, "JSON configuration (unit-suffixed keys)");
    cli.add_option("--out-dir", out_dir, "directory for artifacts and manifest.json");
    cli.add_option("--jobs", g.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
    auto* sopt = cli.add_option("--seed", seed, "random seed for synthetic data");
    auto* topt = cli.add_option("--tolerance", tolerance, "relative tolerance override")->check(CLI::PositiveNumber);
    (void)copt;

    CommandOptions o;
    const char* help[] = {
        "FDM transmission map over wavelength and heater voltage",
        "CW conversion and extinction spectra from CMM rates",
        "ring geometry from target rates",
        "cascaded four-wave-mixing efficiency",
        "spectral purity of heralded photons",
        "control pulse synthesis and emission",
        "figures-of-merit sweep over G and QL/Qo",
        "parameter estimation from measured maps",
        "synthetic transmission maps",
    };
    std::vector<CLI::App*> subs;
    for (std::size_t k = 0; k < command_names().size(); ++k) subs.push_back(cli.add_subcommand(command_names()[k], help[k]));
    subs[static_cast<std::size_t>(Command::purity)]->add_option("--ratio", o.ratios, "Q_s/Q_i ratio (repeatable)");
    subs[static_cast<std::size_t>(Command::fit)]->add_option("--stage", o.stage, "linear | pumped | fdm");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : ExitCode::validation;
    }
    g.config = config;
    g.out_dir = out_dir;
    if (sopt->count()) g.seed = seed;
    if (topt->count()) g.tolerance = tolerance;
    for (std::size_t k = 0; k < subs.size(); ++k)
        if (subs[k]->parsed()) return run_main(static_cast<Command>(k), g, o, std::cout, std::cerr);
    return ExitCode::other;
}
