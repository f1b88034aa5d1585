// Command-line front end: construct / run / sweep / verify.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uwz/errors.hpp"
#include "uwz/harness.hpp"

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    bool has_seed = false;
    std::uint64_t seed = 0;
    bool has_threads = false;
    int threads = 0;
};

uwz::harness::ExperimentConfig resolve_config(const Common& c) {
    auto cfg = c.config_path.empty() ? uwz::harness::ExperimentConfig{}
                                     : uwz::harness::load_config(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw uwz::ConfigError("--set expects key=value, got '" + kv + "'");
        uwz::harness::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.has_seed) cfg.seed = c.seed;
    if (c.has_threads) cfg.threads = c.threads;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* app, Common& c, bool needs_config) {
    auto* opt = app->add_option("--config", c.config_path, "flat key=value config file");
    if (needs_config) opt->required();
    app->add_option("--set", c.overrides, "override a config key (key=value, repeatable)");
    app->add_option("--seed", c.seed, "master seed")->each([&c](const std::string&) {
        c.has_seed = true;
    });
    app->add_option("--threads", c.threads, "worker threads")->each([&c](const std::string&) {
        c.has_threads = true;
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"universal interactive Wyner-Ziv quantizer simulator"};
    app.require_subcommand(1);

    Common c_construct, c_run, c_sweep;
    std::string construct_out = "cache.json";
    auto* construct = app.add_subcommand("construct", "build and persist the code cache");
    add_common(construct, c_construct, true);
    construct->add_option("--out", construct_out, "cache file path");

    std::string run_cache, run_out;
    auto* run = app.add_subcommand("run", "run independent sessions at one sigma_z2");
    add_common(run, c_run, true);
    run->add_option("--cache", run_cache, "cache file from construct")->required();
    run->add_option("--out", run_out, "per-trial CSV path")->required();

    std::string sweep_cache, sweep_out, sweep_plot;
    auto* sweep = app.add_subcommand("sweep", "aggregate sessions over a sigma_z2 list");
    add_common(sweep, c_sweep, true);
    sweep->add_option("--cache", sweep_cache, "cache file from construct")->required();
    sweep->add_option("--out", sweep_out, "aggregate CSV path")->required();
    sweep->add_option("--plot", sweep_plot, "optional SVG plot path");

    std::string verify_suite = "full";
    std::uint64_t verify_seed = 1;
    int verify_threads = 1;
    auto* verify = app.add_subcommand("verify", "run the oracle verification suites");
    verify->add_option("--suite", verify_suite,
                       "transform | sc-oracle | dg-sampler | mi-identity | mmse-identity | "
                       "closeness-test | full");
    verify->add_option("--seed", verify_seed, "master seed");
    verify->add_option("--threads", verify_threads, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        if (construct->parsed()) {
            const auto cfg = resolve_config(c_construct);
            const auto codes = uwz::harness::cmd_construct(cfg, construct_out);
            std::cout << "constructed " << codes.records.size() << " code views ("
                      << codes.rounds() << " rounds, ell " << codes.ell << ") -> "
                      << construct_out << "\n";
            for (int k = 1; k <= codes.rounds(); ++k)
                std::cout << "round " << k << " payload "
                          << static_cast<double>(codes.round_payload_bits(k)) /
                                 static_cast<double>(codes.n)
                          << " bits/sample\n";
        } else if (run->parsed()) {
            const auto cfg = resolve_config(c_run);
            const auto codes = uwz::harness::load_cache(cfg, run_cache);
            uwz::harness::cmd_run(cfg, codes, run_out, std::cout);
        } else if (sweep->parsed()) {
            const auto cfg = resolve_config(c_sweep);
            const auto codes = uwz::harness::load_cache(cfg, sweep_cache);
            uwz::harness::cmd_sweep(cfg, codes, sweep_out, sweep_plot, std::cout);
        } else if (verify->parsed()) {
            return uwz::harness::cmd_verify(verify_suite, verify_seed, verify_threads,
                                            std::cout);
        }
    } catch (const uwz::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const uwz::CacheMiss& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const uwz::InvalidParameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
