// Acceptance suite: one PASS / FAIL / SKIPPED line per criterion. Exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "raid/cli.hpp"
#include "raid/detector.hpp"
#include "raid/evaluation.hpp"
#include "raid/gaussian.hpp"
#include "raid/moments.hpp"
#include "raid/normal.hpp"
#include "raid/stream_io.hpp"

namespace fs = std::filesystem;
using namespace raid;

namespace {

enum class Verdict { pass, fail, skipped };

struct Outcome {
    Verdict verdict;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

Outcome verdict(bool ok, std::string detail) {
    return {ok ? Verdict::pass : Verdict::fail, std::move(detail)};
}

// 1. Streaming moments against a two-pass oracle.
Outcome moment_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> dim(1, 8);
    std::uniform_int_distribution<int> len(2, 10000);
    std::uniform_real_distribution<double> offset(-1e3, 1e3);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    double worst_mean = 0.0;
    double worst_cov = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int k = dim(rng);
        const int n = len(rng);
        const Eigen::VectorXd shift = Eigen::VectorXd::Constant(k, offset(rng));
        const double s = scale(rng);
        std::vector<Eigen::VectorXd> rows;
        rows.reserve(static_cast<std::size_t>(n));
        MultivariateMoments m(static_cast<std::size_t>(k));
        for (int i = 0; i < n; ++i) {
            rows.push_back(shift + oracle::random_vector(k, rng, s));
            m.update(rows.back());
        }
        const auto batch = oracle::two_pass(rows);
        worst_mean = std::max(worst_mean, oracle::rel_err(m.mean(), batch.mean));
        worst_cov = std::max(worst_cov, oracle::rel_err(m.covariance(), batch.cov));
    }
    const double elapsed = seconds_since(t0);
    return verdict(worst_mean <= 1e-9 && worst_cov <= 1e-9 && elapsed < 10.0,
                   fmt("100 streams, max rel err mean %.2e cov %.2e (limit 1e-9), %.2f s (limit 10 s)", worst_mean,
                       worst_cov, elapsed));
}

// 2. Interleaved update / revert against batch statistics of the live window.
Outcome window_equivalence() {
    std::mt19937_64 rng(1002);
    std::uniform_int_distribution<int> dim(1, 8);
    std::uniform_int_distribution<int> ops(50, 800);
    std::uniform_real_distribution<double> push_bias(0.4, 0.8);
    std::uniform_real_distribution<double> offset(-100.0, 100.0);
    double worst = 0.0;
    std::size_t checks = 0;
    for (int schedule = 0; schedule < 1000; ++schedule) {
        const int k = dim(rng);
        const Eigen::VectorXd shift = Eigen::VectorXd::Constant(k, offset(rng));
        std::bernoulli_distribution push(push_bias(rng));
        std::deque<Eigen::VectorXd> live;
        MultivariateMoments m(static_cast<std::size_t>(k));
        const int steps = ops(rng);
        for (int i = 0; i < steps; ++i) {
            if (live.size() < 2 || push(rng)) {
                live.push_back(shift + oracle::random_vector(k, rng));
                m.update(live.back());
            } else {
                m.revert(live.front());
                live.pop_front();
            }
            if (live.size() >= 2 && (i % 25 == 0 || i + 1 == steps)) {
                const auto batch = oracle::two_pass({live.begin(), live.end()});
                worst = std::max({worst, oracle::rel_err(m.mean(), batch.mean),
                                  oracle::rel_err(m.covariance(), batch.cov)});
                ++checks;
            }
        }
    }
    return verdict(worst <= 1e-8, fmt("1000 schedules, %zu window checks, max rel err %.2e (limit 1e-8)", checks, worst));
}

// 3. PPF round trip and the three-sigma constant.
Outcome ppf_correctness() {
    std::mt19937_64 rng(1003);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double q = u(rng);
        worst = std::max(worst, std::abs(uni_cdf(uni_ppf(q, 0.0, 1.0), 0.0, 1.0) - q));
    }
    const double three = uni_ppf(0.99865, 0.0, 1.0);
    return verdict(worst <= 1e-9 && std::abs(three - 3.0) <= 1e-3,
                   fmt("max |cdf(ppf(q)) - q| %.2e (limit 1e-9); ppf(0.99865) = %.6f (3 +- 1e-3)", worst, three));
}

// 4. MVN log-CDF against plain Monte Carlo, and the diagonal identity.
Outcome mvn_accuracy() {
    std::mt19937_64 rng(1004);
    std::uniform_int_distribution<int> dim(2, 5);
    std::size_t within = 0;
    double worst_z = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int k = dim(rng);
        const Eigen::MatrixXd cov = oracle::random_spd(k, rng);
        const Eigen::VectorXd mean = oracle::random_vector(k, rng);
        Eigen::VectorXd x(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            x[j] = mean[j] + (0.5 + 0.75 * oracle::random_vector(1, rng)[0]) * std::sqrt(cov(j, j));
        }
        const CdfEstimate est = mvn_log_cdf(x, GaussianParams{mean, cov, 0.0});
        const auto mc = oracle::monte_carlo_cdf(x, mean, cov, 10000000, 5000 + static_cast<std::uint64_t>(trial));
        const double z = std::abs(std::exp(est.log_prob) - mc.prob) / std::hypot(mc.std_error, est.abs_error);
        worst_z = std::max(worst_z, z);
        within += z <= 3.0 ? 1 : 0;
    }
    double worst_diag = 0.0;
    std::uniform_real_distribution<double> var(0.05, 20.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 1 + trial % 5;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            cov(j, j) = var(rng);
        }
        const Eigen::VectorXd mean = oracle::random_vector(k, rng, 5.0);
        const Eigen::VectorXd x = mean + oracle::random_vector(k, rng, 3.0);
        double want = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            want += std::log(oracle::phi((x[j] - mean[j]) / std::sqrt(cov(j, j))));
        }
        worst_diag = std::max(worst_diag, std::abs(mvn_log_cdf(x, GaussianParams{mean, cov, 0.0}).log_prob - want));
    }
    return verdict(within == 50 && worst_diag <= 1e-10,
                   fmt("%zu/50 within 3 combined SE of 1e7-draw MC (worst %.2f SE); diagonal max abs err %.2e "
                       "(limit 1e-10)",
                       within, worst_z, worst_diag));
}

// 5. Per-signal limit breach rate on stationary data.
Outcome three_sigma_coverage() {
    const Eigen::Index k = 4;
    const std::size_t window = 10000;
    const std::size_t total = 20000;
    DetectorConfig config;
    config.expiration_period = static_cast<double>(window);
    std::mt19937_64 rng(1005);
    Detector d(config, {0.0, oracle::random_vector(k, rng)});
    std::vector<std::size_t> breaches(static_cast<std::size_t>(k), 0);
    std::size_t measured = 0;
    for (std::size_t i = 1; i < total; ++i) {
        const DetectionRecord r = d.step({static_cast<double>(i), oracle::random_vector(k, rng)});
        if (i >= window) {
            ++measured;
            for (std::size_t j = 0; j < breaches.size(); ++j) {
                breaches[j] += r.y_s[j];
            }
        }
    }
    bool ok = true;
    std::string rates;
    for (std::size_t b : breaches) {
        const double rate = 100.0 * static_cast<double>(b) / static_cast<double>(measured);
        ok = ok && std::abs(rate - 0.27) <= 0.2;
        rates += fmt("%.3f%% ", rate);
    }
    return verdict(ok, fmt("k=4, window %zu samples, %zu scored samples; breach rates %s(target 0.27 +- 0.2 pp)",
                           window, measured, rates.c_str()));
}

// 6. Changepoint adaptation on a permanent +10 sigma shift.
Outcome changepoint_adaptation() {
    const SynthParams p;
    const LabeledStream s = synth_scenario(ScenarioKind::mean_shift, p, 1006);
    DetectorConfig config;
    config.expiration_period = 400.0 * p.interval;
    config.two_sided_score = true;
    Detector d(config, s.observations.front());
    std::vector<DetectionRecord> records{*d.initial_record()};
    for (std::size_t i = 1; i < s.observations.size(); ++i) {
        records.push_back(d.step(s.observations[i]));
    }
    const double shift_time = s.observations[p.shift_index].timestamp;
    std::optional<std::size_t> first_change;
    for (std::size_t i = p.shift_index; i < records.size() && !first_change; ++i) {
        if (records[i].y_c) {
            first_change = i;
        }
    }
    if (!first_change) {
        return {Verdict::fail, "y_c never fired after the shift"};
    }
    const double delay = records[*first_change].timestamp - shift_time;
    std::optional<std::size_t> adapted;
    for (std::size_t i = *first_change; i < records.size() && !adapted; ++i) {
        if (!records[i].y_g) {
            adapted = i;
        }
    }
    if (!adapted) {
        return {Verdict::fail, "the model never returned to normal after y_c"};
    }
    const auto rate_after = [&](std::size_t from) {
        std::size_t n = 0;
        std::size_t anomalies = 0;
        for (std::size_t i = from + 1; i < records.size(); ++i) {
            if (records[i].timestamp > records[from].timestamp + config.expiration_period) {
                break;
            }
            ++n;
            anomalies += records[i].y_g ? 1 : 0;
        }
        return n ? 100.0 * static_cast<double>(anomalies) / static_cast<double>(n) : 100.0;
    };
    const double rate = rate_after(*first_change);
    const bool anomalies_before = std::any_of(records.begin() + static_cast<std::ptrdiff_t>(p.shift_index),
                                              records.begin() + static_cast<std::ptrdiff_t>(*first_change),
                                              [](const DetectionRecord& r) { return r.y_g; });
    return verdict(delay <= config.adaptation() && anomalies_before && rate < 1.0,
                   fmt("y_c after %.0f s (t_a %.0f s); anomaly rate over the t_e after y_c %.2f%% (limit 1%%); "
                       "first normal record %zu samples after y_c",
                       delay, config.adaptation(), rate, *adapted - *first_change));
}

// 7. One sampling anomaly, on the first observation after the gap.
Outcome sampling_loss() {
    const SynthParams p;
    const LabeledStream s = synth_scenario(ScenarioKind::packet_loss, p, 1007);
    DetectorConfig config;
    config.expiration_period = 400.0 * p.interval;
    Detector d(config, s.observations.front());
    std::vector<std::size_t> flagged;
    if (d.initial_record()->y_t) {
        flagged.push_back(0);
    }
    for (std::size_t i = 1; i < s.observations.size(); ++i) {
        if (d.step(s.observations[i]).y_t) {
            flagged.push_back(i);
        }
    }
    const bool ok = flagged.size() == 1 && flagged.front() == p.gap_index;
    return verdict(ok, fmt("%zu sampling anomalies, first at index %zu, gap ends at index %zu (%zu-step gap)",
                           flagged.size(), flagged.empty() ? std::size_t{0} : flagged.front(), p.gap_index,
                           p.gap_steps));
}

// 8. SKAB reproduction. Protocol: one fresh detector per file, t_e = 400 s,
// default q and grace, one-sided score, all samples counted, T picked by F1
// over {-40, -25, -10}.
Outcome skab_reproduction() {
    const char* env = std::getenv("RAID_SKAB_DIR");
    const fs::path root = env ? fs::path(env) : fs::path(RAID_SOURCE_DIR) / "data" / "SKAB";
    if (!fs::is_directory(root)) {
        return {Verdict::skipped, "dataset not found (set RAID_SKAB_DIR or place it under data/SKAB)"};
    }
    const auto t0 = Clock::now();
    const auto streams = load_skab(root.string());
    DetectorConfig config;
    config.expiration_period = 400.0;
    const std::vector<double> grid{-40.0, -25.0, -10.0};
    const SweepResult r = sweep_threshold(config, streams, grid);
    const double elapsed = seconds_since(t0);
    const double f1 = 100.0 * r.best.f1;
    const double precision = 100.0 * r.best.precision;
    const double recall = 100.0 * r.best.recall;
    const bool ok = std::abs(f1 - 48.70) <= 5.0 && std::abs(precision - 47.56) <= 5.0 &&
                    std::abs(recall - 49.90) <= 5.0 && elapsed <= 600.0;
    return verdict(ok, fmt("%zu files, best T %.0f: F1 %.2f%% (48.70), precision %.2f%% (47.56), recall %.2f%% "
                           "(49.90), +-5 pp; %.0f s (limit 600 s)",
                           streams.size(), r.best_threshold, f1, precision, recall, elapsed));
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("raid_acceptance_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::istringstream in;
    std::ostringstream o;
    std::ostringstream e;
    const int code = cli::run_cli(args, in, o, e);
    if (out) {
        *out = o.str();
    }
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// 9. Average latency at k = 8, measured by the bench command.
Outcome latency(const TempDir& dir) {
    const std::string input = (dir.path / "k8.csv").string();
    if (cli({"synth", "--kind", "spikes", "--seed", "1009", "--dim", "8", "--samples", "10000", "--output", input}) != 0) {
        return {Verdict::fail, "synth failed"};
    }
    std::string out;
    if (cli({"bench", "--input", input, "--label-column", "label", "--expiration-period", "1000m", "--threshold",
             "-25"},
            &out) != 0) {
        return {Verdict::fail, "bench failed"};
    }
    const auto doc = nlohmann::json::parse(out.substr(out.find('{')));
    const double ms = doc.at("avg_latency_ms").get<double>();
    return verdict(ms <= 5.0, fmt("k=8, %zu samples, %.3f ms/sample (limit 5 ms)",
                                  doc.at("samples").get<std::size_t>(), ms));
}

// 10. Byte-identical record files, with and without a snapshot cycle.
Outcome determinism(const TempDir& dir) {
    const std::string input = (dir.path / "det.csv").string();
    if (cli({"synth", "--kind", "spikes", "--seed", "1010", "--samples", "1500", "--quiet-prefix", "500", "--spikes",
             "15", "--output", input}) != 0) {
        return {Verdict::fail, "synth failed"};
    }
    const std::vector<std::string> run{"run", "--input", input, "--value-columns", "x0,x1", "--expiration-period",
                                       "400m", "--threshold", "-25", "--two-sided", "--seed", "42", "--output"};
    auto run_to = [&](const std::string& name) {
        auto args = run;
        args.push_back((dir.path / name).string());
        return cli(args);
    };
    if (run_to("a.jsonl") != 0 || run_to("b.jsonl") != 0) {
        return {Verdict::fail, "run failed"};
    }
    const std::string a = slurp(dir.path / "a.jsonl");
    const bool identical = !a.empty() && a == slurp(dir.path / "b.jsonl");

    StreamSchema schema;
    schema.value_columns = {"x0", "x1"};
    const StreamData data = read_stream_file(input, schema);
    DetectorConfig config;
    config.expiration_period = 400.0 * 60.0;
    config.two_sided_score = true;
    config.qmc.seed = 42;
    std::mt19937_64 rng(1010);
    std::uniform_int_distribution<std::size_t> where(1, data.observations.size() - 1);
    std::size_t unchanged = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t cut = where(rng);
        std::ostringstream out;
        std::optional<Detector> d(std::in_place, config, data.observations.front());
        write_record(out, *d->initial_record());
        for (std::size_t i = 1; i < data.observations.size(); ++i) {
            if (i == cut) {
                const std::string doc = snapshot_save(*d).dump();
                d.emplace(snapshot_load(nlohmann::json::parse(doc)));
            }
            write_record(out, d->step(data.observations[i]));
        }
        unchanged += out.str() == a ? 1 : 0;
    }
    return verdict(identical && unchanged == 10,
                   fmt("repeat run byte-identical: %s; %zu/10 snapshot cycles left the record file unchanged",
                       identical ? "yes" : "no", unchanged));
}

}  // namespace

int main() {
    TempDir dir;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 moment-oracle equivalence", moment_oracle},
        {"2 window equivalence", window_equivalence},
        {"3 PPF correctness", ppf_correctness},
        {"4 MVN log-CDF accuracy", mvn_accuracy},
        {"5 three-sigma coverage", three_sigma_coverage},
        {"6 changepoint adaptation", changepoint_adaptation},
        {"7 sampling-loss detection", sampling_loss},
        {"8 SKAB reproduction", skab_reproduction},
        {"9 latency", [&] { return latency(dir); }},
        {"10 determinism and snapshot", [&] { return determinism(dir); }},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {Verdict::fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIPPED";
        failures += o.verdict == Verdict::fail ? 1 : 0;
        std::cout << "[" << tag << "] " << name << ": " << o.detail << std::endl;
    }
    std::cout << (failures == 0 ? "acceptance: all criteria met\n" : "acceptance: failures present\n");
    return failures == 0 ? 0 : 1;
}
