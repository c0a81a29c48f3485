// Command line front end: parse a config, validate it or run the experiment
// it describes, and report the output manifest on stdout.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sbdlab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"spatial birth-death process laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed_override;
    int threads = 1;

    CLI::App* run = app.add_subcommand("run", "execute an experiment config and write its outputs");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--output-dir", output_dir,
                    "run directory (default: $SBDLAB_OUTPUT_ROOT or ./runs, plus the config name)");
    run->add_option("--seed-override", seed_override, "replace the config seed for this run");
    run->add_option("--threads", threads, "worker threads for ensemble experiments")
        ->check(CLI::PositiveNumber);

    CLI::App* validate = app.add_subcommand("validate", "parse and check a config without running it");
    validate->add_option("config", config_path, "experiment config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const sbdlab::ExperimentConfig cfg = sbdlab::load_config(config_path);
        if (validate->parsed()) {
            sbdlab::dry_check(cfg);
            std::cout << "ok: " << cfg.name << " (" << sbdlab::to_string(cfg.kind)
                      << ", config " << cfg.config_hash << ")\n";
            return 0;
        }

        sbdlab::RunOptions opts;
        opts.output_dir = output_dir;
        opts.seed_override = seed_override;
        opts.threads = threads;
        const sbdlab::RunManifest man = sbdlab::run_experiment(cfg, opts);

        std::cout << "wrote " << man.outputs.size() + 1 << " files to " << man.directory << "\n";
        for (const sbdlab::OutputRecord& rec : man.outputs)
            std::cout << "  " << rec.path << "  " << rec.hash << "  " << rec.bytes << " bytes\n";
        std::cout << "  manifest.json\n";
        if (!man.certificates_passed) {
            std::cerr << "certificate violated: see certificate.json\n";
            return 3;
        }
        return 0;
    } catch (const sbdlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
