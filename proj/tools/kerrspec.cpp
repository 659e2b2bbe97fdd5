// kerrspec - command-line front end.
//
//   kerrspec one-tone --preset f_039 --out out/f039
//   kerrspec lock --config configs/lock.ini --seed 7 --threads 4

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kerrspec/app.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Reflection spectra, parametric oscillation and circuit model of a Kerr resonator"};
    cli.require_subcommand(0, 1);

    kerrspec::app::Request req;
    std::string config, preset, out;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool svg = true;

    cli.add_option("--config", config, "configuration file (key = value with [sections])")->check(CLI::ExistingFile);
    cli.add_option("--preset", preset, "device preset: f_m001, f_031 or f_039");
    cli.add_option("--out", out, "output directory (default: out)");
    cli.add_option("--seed", seed, "random seed for stochastic commands");
    cli.add_option("--threads", threads, "worker threads (fallback: KERRSPEC_THREADS, then 1)")->check(CLI::Range(1u, 1024u));
    auto* svg_flag = cli.add_flag("--svg,!--no-svg", svg, "write SVG heatmaps for spectra");

    for (const auto& name : kerrspec::app::commands())
        cli.add_subcommand(name, "run the " + name + " command")->fallthrough();

    CLI11_PARSE(cli, argc, argv);

    for (auto* sub : cli.get_subcommands()) req.command = sub->get_name();
    if (!config.empty()) req.config_path = config;
    if (!preset.empty()) req.preset = preset;
    if (!out.empty()) req.out_dir = out;
    if (cli.count("--seed")) req.seed = seed;
    if (threads > 0) req.threads = threads;
    if (svg_flag->count()) req.svg = svg;

    if (req.command.empty() && !req.config_path) {
        std::cerr << "error: give a command or a --config naming one\n" << cli.help();
        return 2;
    }
    const auto outcome = kerrspec::app::run(req, std::cerr);
    for (const auto& f : outcome.files) std::cout << f << "\n";
    return outcome.exit_code;
}
