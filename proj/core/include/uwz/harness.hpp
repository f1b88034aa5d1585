#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uwz/polar.hpp"
#include "uwz/protocol.hpp"
#include "uwz/selftest.hpp"

namespace uwz::harness {

struct ExperimentConfig {
    std::size_t n = 4096;
    int ell = 0;  // 0: derived from the part variances
    double sigma0_sq = 2.0;
    double sigma_r_sq = 8.0;
    double omega = 0.5;
    double sigma_x2 = 16.0;
    double delta = 1.0;
    double sigma_z2 = 3.5;
    std::vector<double> sigma_z2_sweep;
    std::size_t hash_m = 256;
    int mc_samples = 2000;
    double z_low = 0.05;
    double z_high = 0.95;
    double i2_error_budget = 0.02;
    double freeze_minor_budget = 0.01;
    int trials = 200;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
    model::GuessSchedule schedule() const;
    model::SourceParams source() const;
    int resolved_ell() const;
    polar::ConstructionConfig construction() const;

    // Digest over everything the constructed codes depend on (sigma_z2 and
    // trial counts excluded, so one cache serves a whole sweep).
    std::string digest() const;
};

// Flat key=value file; '#' starts a comment.
ExperimentConfig load_config(const std::string& path);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct TrialResult {
    double sigma_z2 = 0.0;
    int trial = 0;
    int tau = 0;
    double rate_bits_per_sample = 0.0;
    std::size_t feedback_bits = 0;
    double mse_per_sample = 0.0;
    bool success = false;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
};

inline constexpr const char* kCsvHeader =
    "sigma_z2,trial,tau,rate_bits_per_sample,feedback_bits,mse_per_sample,success,seed";

// Builds every (part, guess) view for the configured schedule.
protocol::SessionCodes build_session_codes(const ExperimentConfig& cfg);

hashtest::HashParams hash_params_for(const ExperimentConfig& cfg);

// Cache file: JSON with a version field, the config digest, and binary
// (hex) bitset payloads per record.
void save_cache(const protocol::SessionCodes& codes, const ExperimentConfig& cfg,
                const std::string& path);
protocol::SessionCodes load_cache(const ExperimentConfig& cfg, const std::string& path);

// construct: build (or reuse) the cache; idempotent for a fixed config+seed.
protocol::SessionCodes cmd_construct(const ExperimentConfig& cfg, const std::string& cache_path);

// run: `trials` sessions at the configured sigma_z2.
std::vector<TrialResult> cmd_run(const ExperimentConfig& cfg,
                                 const protocol::SessionCodes& codes,
                                 const std::string& csv_path, std::ostream& log);

struct SweepRow {
    double sigma_z2 = 0.0;
    int trials = 0;
    double mean_tau = 0.0;
    double mean_rate = 0.0;
    double mean_mse = 0.0;
    double success_frac = 0.0;
};

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg,
                                const protocol::SessionCodes& codes,
                                const std::string& csv_path, const std::string& plot_path,
                                std::ostream& log);

// verify: runs the oracle suites; returns the process exit code (0/1).
int cmd_verify(const std::string& selector, std::uint64_t seed, int threads, std::ostream& log);

TrialResult run_trial(const ExperimentConfig& cfg, const protocol::SessionCodes& codes,
                      const hashtest::HashParams& hp, double sigma_z2, int trial);

void write_trials_csv(const std::vector<TrialResult>& rows, const std::string& path);

} // namespace uwz::harness
