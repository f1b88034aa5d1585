#include "uwz/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "uwz/errors.hpp"

namespace uwz::harness {

using nlohmann::json;

void ExperimentConfig::validate() const {
    if (n < 2 || (n & (n - 1)) != 0) throw ConfigError("config: n must be a power of two >= 2");
    if (!(delta > 0.0)) throw ConfigError("config: delta must be positive");
    if (!(sigma0_sq > delta)) throw ConfigError("config: sigma0_sq must exceed delta");
    if (!(sigma_r_sq >= sigma0_sq)) throw ConfigError("config: sigma_r_sq < sigma0_sq");
    if (!(omega > 0.0)) throw ConfigError("config: omega must be positive");
    if (!(sigma_x2 > 0.0)) throw ConfigError("config: sigma_x2 must be positive");
    if (hash_m == 0) throw ConfigError("config: hash_m must be positive");
    if (mc_samples < 1) throw ConfigError("config: mc_samples must be >= 1");
    if (!(z_low >= 0.0 && z_low < z_high && z_high <= 1.0))
        throw ConfigError("config: need 0 <= z_low < z_high <= 1");
    if (!(i2_error_budget > 0.0)) throw ConfigError("config: i2_error_budget must be positive");
    if (trials < 0) throw ConfigError("config: trials must be >= 0");
    if (threads < 1) throw ConfigError("config: threads must be >= 1");
    const auto sched = model::make_schedule(sigma0_sq, sigma_r_sq, omega);
    if (sched.rounds() < 1)
        throw ConfigError("config: schedule has no guesses beyond sigma_0^2");
    if (!(sched.sigma2.back() < sigma_x2))
        throw ConfigError("config: schedule exceeds sigma_x2 (pole in the side-info scaling)");
    if (ell < 0 || ell > 16) throw ConfigError("config: ell out of range");
}

model::GuessSchedule ExperimentConfig::schedule() const {
    return model::make_schedule(sigma0_sq, sigma_r_sq, omega);
}

model::SourceParams ExperimentConfig::source() const {
    return model::SourceParams{sigma_x2, sigma_z2, delta};
}

int ExperimentConfig::resolved_ell() const {
    if (ell > 0) return ell;
    const auto sched = schedule();
    model::SourceParams src{sigma_x2, sigma_z2, delta};
    const auto lat = lattice::make_lattice(static_cast<int>(std::lround(std::log2(n))));
    double max_sd = 0.0;
    for (int k = 1; k <= sched.rounds(); ++k)
        max_sd = std::max(max_sd, std::sqrt(model::round_params(k, sched, src).var_part));
    int e = 1;
    while (lat.scale * std::exp2(e - 1) < 6.0 * max_sd && e < 16) ++e;
    return e;
}

polar::ConstructionConfig ExperimentConfig::construction() const {
    polar::ConstructionConfig c;
    c.mc_samples = mc_samples;
    c.z_low = z_low;
    c.z_high = z_high;
    c.i2_error_budget = i2_error_budget;
    c.freeze_minor_budget = freeze_minor_budget;
    return c;
}

std::string ExperimentConfig::digest() const {
    std::ostringstream os;
    os.precision(17);
    os << "v1|n=" << n << "|ell=" << resolved_ell();
    const auto sched = schedule();
    os << "|sigma2=";
    for (double s : sched.sigma2) os << s << ",";
    os << "|sx2=" << sigma_x2 << "|delta=" << delta << "|zl=" << z_low << "|zh=" << z_high
       << "|mc=" << mc_samples << "|budget=" << i2_error_budget << ","
       << freeze_minor_budget << "|seed=" << seed;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : os.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

} // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "n") cfg.n = static_cast<std::size_t>(std::stoull(value));
        else if (key == "ell") cfg.ell = std::stoi(value);
        else if (key == "sigma0_sq") cfg.sigma0_sq = std::stod(value);
        else if (key == "sigma_r_sq") cfg.sigma_r_sq = std::stod(value);
        else if (key == "omega") cfg.omega = std::stod(value);
        else if (key == "sigma_x2") cfg.sigma_x2 = std::stod(value);
        else if (key == "delta") cfg.delta = std::stod(value);
        else if (key == "sigma_z2") cfg.sigma_z2 = std::stod(value);
        else if (key == "sigma_z2_sweep") cfg.sigma_z2_sweep = parse_list(value);
        else if (key == "hash_m") cfg.hash_m = static_cast<std::size_t>(std::stoull(value));
        else if (key == "mc_samples") cfg.mc_samples = std::stoi(value);
        else if (key == "z_low") cfg.z_low = std::stod(value);
        else if (key == "z_high") cfg.z_high = std::stod(value);
        else if (key == "i2_error_budget") cfg.i2_error_budget = std::stod(value);
        else if (key == "freeze_minor_budget") cfg.freeze_minor_budget = std::stod(value);
        else if (key == "trials") cfg.trials = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "threads") cfg.threads = std::stoi(value);
        else throw ConfigError("config: unknown key '" + key + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config: bad value for '" + key + "': " + value);
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

hashtest::HashParams hash_params_for(const ExperimentConfig& cfg) {
    return hashtest::choose_hash_params(cfg.n, cfg.delta, cfg.sigma_x2, cfg.hash_m);
}

protocol::SessionCodes build_session_codes(const ExperimentConfig& cfg) {
    cfg.validate();
    protocol::SessionCodes codes;
    codes.n = cfg.n;
    codes.ell = cfg.resolved_ell();
    codes.lat = lattice::make_lattice(static_cast<int>(std::lround(std::log2(cfg.n))));
    codes.src = model::SourceParams{cfg.sigma_x2, cfg.sigma_z2, cfg.delta};
    codes.sched = cfg.schedule();
    const int r = codes.sched.rounds();
    for (int k = 1; k <= r; ++k)
        codes.rp.push_back(model::round_params(k, codes.sched, codes.src));

    const auto ccfg = cfg.construction();
    // records in tri_index order: row j holds views (j,j..r)
    for (int j = 1; j <= r; ++j) {
        polar::ConstructionSampler sampler;
        sampler.sigma_x2 = cfg.sigma_x2;
        sampler.var_accum =
            j >= 2 ? codes.rp[static_cast<std::size_t>(j - 2)].alpha_k * cfg.sigma_x2 : 0.0;
        // sample the true law at the guess itself: within a bracket the
        // matched top is the decoder's worst case (smaller sigma_z2 only
        // sharpens its observation)
        sampler.sigma_z2_sample = codes.sched.sigma2[static_cast<std::size_t>(j)];
        sampler.ybar_scale = codes.rp[static_cast<std::size_t>(j - 1)].ybar_scale;

        auto diag = polar::construct_sets(j, cfg.n, codes.ell, codes.channel(j, j), sampler,
                                          ccfg, mix_keys(cfg.seed, seed_tag::construct,
                                                         static_cast<std::uint64_t>(j),
                                                         static_cast<std::uint64_t>(j)),
                                          cfg.threads);
        codes.records.push_back(std::move(diag));
        for (int k = j + 1; k <= r; ++k) {
            polar::ConstructionSampler sk = sampler;
            sk.sigma_z2_sample = codes.sched.sigma2[static_cast<std::size_t>(k)];
            sk.ybar_scale = codes.rp[static_cast<std::size_t>(k - 1)].ybar_scale;
            const auto& diag_rec = codes.at(j, j);
            const auto& prev_rec = codes.at(j, k - 1);
            auto rec = polar::construct_incremental_sets(
                diag_rec, prev_rec, k, codes.channel(j, k), sk, ccfg,
                mix_keys(cfg.seed, seed_tag::construct, static_cast<std::uint64_t>(j),
                         static_cast<std::uint64_t>(k)),
                cfg.threads);
            codes.records.push_back(std::move(rec));
        }
    }
    return codes;
}

namespace {

std::string flags_to_hex(const std::vector<std::uint8_t>& flags) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve((flags.size() + 3) / 4);
    unsigned nib = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        nib = (nib << 1) | (flags[i] & 1u);
        if (i % 4 == 3) {
            out.push_back(digits[nib]);
            nib = 0;
        }
    }
    if (flags.size() % 4 != 0) {
        nib <<= (4 - flags.size() % 4);
        out.push_back(digits[nib]);
    }
    return out;
}

std::vector<std::uint8_t> hex_to_flags(const std::string& hex, std::size_t n) {
    std::vector<std::uint8_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const char c = hex.at(i / 4);
        const int v = c <= '9' ? c - '0' : c - 'a' + 10;
        out[i] = static_cast<std::uint8_t>((v >> (3 - i % 4)) & 1);
    }
    return out;
}

json record_to_json(const polar::ConstructionRecord& rec) {
    json levels = json::array();
    for (const auto& lv : rec.sets.levels)
        levels.push_back({{"f1", flags_to_hex(lv.f1)},
                          {"i2", flags_to_hex(lv.i2)},
                          {"f1d", flags_to_hex(lv.f1_det)}});
    json j{{"part_round", rec.part_round},
           {"noise_round", rec.noise_round},
           {"levels", levels}};
    if (!rec.z_prior.empty()) j["z_prior"] = rec.z_prior;
    if (!rec.z_x.empty()) j["z_x"] = rec.z_x;
    if (!rec.z_y.empty()) j["z_y"] = rec.z_y;
    return j;
}

polar::ConstructionRecord record_from_json(const json& j, std::size_t n, int ell) {
    polar::ConstructionRecord rec;
    rec.part_round = j.at("part_round").get<int>();
    rec.noise_round = j.at("noise_round").get<int>();
    rec.sets.n = n;
    rec.sets.ell = ell;
    for (const auto& lv : j.at("levels")) {
        polar::LevelSets ls;
        ls.f1 = hex_to_flags(lv.at("f1").get<std::string>(), n);
        ls.i2 = hex_to_flags(lv.at("i2").get<std::string>(), n);
        ls.f1_det = hex_to_flags(lv.at("f1d").get<std::string>(), n);
        rec.sets.levels.push_back(std::move(ls));
    }
    rec.sets.validate();
    if (j.contains("z_prior")) rec.z_prior = j.at("z_prior").get<std::vector<std::vector<double>>>();
    if (j.contains("z_x")) rec.z_x = j.at("z_x").get<std::vector<std::vector<double>>>();
    if (j.contains("z_y")) rec.z_y = j.at("z_y").get<std::vector<std::vector<double>>>();
    return rec;
}

} // namespace

void save_cache(const protocol::SessionCodes& codes, const ExperimentConfig& cfg,
                const std::string& path) {
    json j;
    j["version"] = 1;
    j["digest"] = cfg.digest();
    j["n"] = codes.n;
    j["ell"] = codes.ell;
    j["records"] = json::array();
    for (const auto& rec : codes.records) j["records"].push_back(record_to_json(rec));
    std::ofstream out(path);
    if (!out) throw ConfigError("cache: cannot write " + path);
    out << j.dump() << "\n";
}

protocol::SessionCodes load_cache(const ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw CacheMiss("cache: " + path + " not found; run `uwz construct` first");
    json j;
    in >> j;
    if (j.value("version", 0) != 1) throw CacheMiss("cache: unsupported version");
    if (j.value("digest", "") != cfg.digest())
        throw CacheMiss("cache: config digest mismatch; re-run `uwz construct` with this config");

    protocol::SessionCodes codes;
    codes.n = j.at("n").get<std::size_t>();
    codes.ell = j.at("ell").get<int>();
    codes.lat = lattice::make_lattice(static_cast<int>(std::lround(std::log2(codes.n))));
    codes.src = model::SourceParams{cfg.sigma_x2, cfg.sigma_z2, cfg.delta};
    codes.sched = cfg.schedule();
    for (int k = 1; k <= codes.sched.rounds(); ++k)
        codes.rp.push_back(model::round_params(k, codes.sched, codes.src));
    for (const auto& rj : j.at("records"))
        codes.records.push_back(record_from_json(rj, codes.n, codes.ell));
    const int r = codes.sched.rounds();
    if (codes.records.size() != static_cast<std::size_t>(r * (r + 1) / 2))
        throw CacheMiss("cache: record count does not cover the schedule");
    return codes;
}

protocol::SessionCodes cmd_construct(const ExperimentConfig& cfg, const std::string& cache_path) {
    cfg.validate();
    try {
        auto codes = load_cache(cfg, cache_path);
        save_cache(codes, cfg, cache_path);  // idempotent rewrite
        return codes;
    } catch (const CacheMiss&) {
    }
    auto codes = build_session_codes(cfg);
    save_cache(codes, cfg, cache_path);
    return codes;
}

TrialResult run_trial(const ExperimentConfig& cfg, const protocol::SessionCodes& codes,
                      const hashtest::HashParams& hp, double sigma_z2, int trial) {
    protocol::SessionCodes local = codes;  // cheap: records shared via copy
    local.src.sigma_z2 = sigma_z2;
    model::SourceParams src{cfg.sigma_x2, sigma_z2, cfg.delta};

    protocol::SessionSeeds seeds;
    const std::uint64_t base = mix_keys(cfg.seed, seed_tag::trial,
                                        static_cast<std::uint64_t>(trial),
                                        static_cast<std::uint64_t>(sigma_z2 * 4096.0));
    seeds.source = mix_keys(base, 1);
    seeds.encoder = mix_keys(base, 2);
    seeds.shared = mix_keys(base, 3);
    seeds.hash_r = mix_keys(base, 4);

    const auto t0 = std::chrono::steady_clock::now();
    const auto tr = protocol::run_session(src, local, hp, seeds);
    const auto t1 = std::chrono::steady_clock::now();

    TrialResult res;
    res.sigma_z2 = sigma_z2;
    res.trial = trial;
    res.tau = tr.tau;
    res.rate_bits_per_sample = tr.total_rate;
    res.feedback_bits = tr.feedback_bits;
    res.mse_per_sample = tr.mse;
    res.success = tr.success;
    res.seed = base;
    res.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    return res;
}

void write_trials_csv(const std::vector<TrialResult>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("run: cannot write " + path);
    out << kCsvHeader << "\n";
    out.precision(10);
    for (const auto& r : rows)
        out << r.sigma_z2 << "," << r.trial << "," << r.tau << "," << r.rate_bits_per_sample
            << "," << r.feedback_bits << "," << r.mse_per_sample << "," << (r.success ? 1 : 0)
            << "," << r.seed << "\n";
}

namespace {

void print_aggregates(const std::vector<TrialResult>& rows, std::ostream& log) {
    if (rows.empty()) {
        log << "no trials\n";
        return;
    }
    auto mean = [&](auto f) {
        double acc = 0.0;
        for (const auto& r : rows) acc += f(r);
        return acc / static_cast<double>(rows.size());
    };
    auto quantile = [&](auto f, double p) {
        std::vector<double> v;
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(f(r));
        std::sort(v.begin(), v.end());
        const std::size_t i = static_cast<std::size_t>(p * (static_cast<double>(v.size()) - 1));
        return v[i];
    };
    auto rate = [](const TrialResult& r) { return r.rate_bits_per_sample; };
    auto mse = [](const TrialResult& r) { return r.mse_per_sample; };
    auto tau = [](const TrialResult& r) { return static_cast<double>(r.tau); };
    log << "trials " << rows.size() << "  mean_tau " << mean(tau) << "  mean_rate "
        << mean(rate) << "  rate_q10 " << quantile(rate, 0.1) << "  rate_q90 "
        << quantile(rate, 0.9) << "  mean_mse " << mean(mse) << "  mse_q90 "
        << quantile(mse, 0.9) << "  success "
        << mean([](const TrialResult& r) { return r.success ? 1.0 : 0.0; }) << "\n";
}

} // namespace

std::vector<TrialResult> cmd_run(const ExperimentConfig& cfg,
                                 const protocol::SessionCodes& codes,
                                 const std::string& csv_path, std::ostream& log) {
    const auto hp = hash_params_for(cfg);
    std::vector<TrialResult> rows;
    rows.reserve(static_cast<std::size_t>(cfg.trials));
    for (int t = 0; t < cfg.trials; ++t)
        rows.push_back(run_trial(cfg, codes, hp, cfg.sigma_z2, t));
    if (!csv_path.empty()) write_trials_csv(rows, csv_path);
    print_aggregates(rows, log);
    return rows;
}

namespace {

void write_sweep_plot(const std::vector<SweepRow>& rows, const ExperimentConfig& cfg,
                      const std::string& path) {
    // rate vs (1/2) log2(sigma_z^2/delta), with the y = x reference line
    const double w = 480, h = 360, ml = 56, mb = 44, mt = 16, mr = 16;
    double xmax = 0.1, ymax = 0.1;
    for (const auto& r : rows) {
        xmax = std::max(xmax, 0.5 * std::log2(r.sigma_z2 / cfg.delta));
        ymax = std::max(ymax, r.mean_rate);
    }
    xmax *= 1.15;
    ymax = std::max(ymax * 1.15, xmax);
    auto px = [&](double x) { return ml + x / xmax * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - y / ymax * (h - mb - mt); };

    std::ofstream out(path);
    if (!out) throw ConfigError("sweep: cannot write plot " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    out << "<line x1='" << px(0) << "' y1='" << py(0) << "' x2='" << px(xmax) << "' y2='"
        << py(0) << "' stroke='black'/>\n";
    out << "<line x1='" << px(0) << "' y1='" << py(0) << "' x2='" << px(0) << "' y2='"
        << py(ymax) << "' stroke='black'/>\n";
    out << "<line x1='" << px(0) << "' y1='" << py(0) << "' x2='" << px(std::min(xmax, ymax))
        << "' y2='" << py(std::min(xmax, ymax))
        << "' stroke='#999' stroke-dasharray='4,3'/>\n";
    for (const auto& r : rows) {
        const double x = 0.5 * std::log2(r.sigma_z2 / cfg.delta);
        out << "<circle cx='" << px(x) << "' cy='" << py(r.mean_rate)
            << "' r='4' fill='#1f77b4'/>\n";
    }
    out << "<text x='" << (w / 2) << "' y='" << (h - 8)
        << "' font-size='12' text-anchor='middle'>(1/2) log2(sigma_z^2 / delta)</text>\n";
    out << "<text x='14' y='" << (h / 2)
        << "' font-size='12' text-anchor='middle' transform='rotate(-90 14 " << (h / 2)
        << ")'>mean rate (bits/sample)</text>\n</svg>\n";
}

} // namespace

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg,
                                const protocol::SessionCodes& codes,
                                const std::string& csv_path, const std::string& plot_path,
                                std::ostream& log) {
    const auto hp = hash_params_for(cfg);
    const auto sched = cfg.schedule();
    std::vector<double> points = cfg.sigma_z2_sweep;
    if (points.empty()) points.push_back(cfg.sigma_z2);

    std::vector<SweepRow> rows;
    std::vector<TrialResult> all;
    for (double sz2 : points) {
        if (sz2 < sched.sigma2.front() || sz2 > sched.sigma2.back())
            log << "warning: sigma_z2 " << sz2
                << " outside the schedule interval; exhaustion path will be exercised\n";
        SweepRow row;
        row.sigma_z2 = sz2;
        row.trials = cfg.trials;
        for (int t = 0; t < cfg.trials; ++t) {
            const auto res = run_trial(cfg, codes, hp, sz2, t);
            row.mean_tau += res.tau;
            row.mean_rate += res.rate_bits_per_sample;
            row.mean_mse += res.mse_per_sample;
            row.success_frac += res.success ? 1.0 : 0.0;
            all.push_back(res);
        }
        if (cfg.trials > 0) {
            row.mean_tau /= cfg.trials;
            row.mean_rate /= cfg.trials;
            row.mean_mse /= cfg.trials;
            row.success_frac /= cfg.trials;
        }
        log << "sigma_z2 " << sz2 << "  mean_tau " << row.mean_tau << "  mean_rate "
            << row.mean_rate << "  mean_mse " << row.mean_mse << "  success "
            << row.success_frac << "\n";
        rows.push_back(row);
    }

    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw ConfigError("sweep: cannot write " + csv_path);
        out << "sigma_z2,trials,mean_tau,mean_rate,mean_mse,success_frac\n";
        out.precision(10);
        for (const auto& r : rows)
            out << r.sigma_z2 << "," << r.trials << "," << r.mean_tau << "," << r.mean_rate
                << "," << r.mean_mse << "," << r.success_frac << "\n";
    }
    if (!plot_path.empty()) write_sweep_plot(rows, cfg, plot_path);
    return rows;
}

int cmd_verify(const std::string& selector, std::uint64_t seed, int threads, std::ostream& log) {
    const auto results = selftest::run_suite(selector.empty() ? "full" : selector, seed, threads);
    for (const auto& r : results)
        log << (r.pass ? "[PASS] " : "[FAIL] ") << r.suite << ": " << r.name
            << (r.detail.empty() ? "" : "  (" + r.detail + ")") << "\n";
    return selftest::all_passed(results) ? 0 : 1;
}

} // namespace uwz::harness
