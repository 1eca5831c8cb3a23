#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ekss/affinity.hpp"
#include "ekss/eval.hpp"
#include "ekss/io.hpp"
#include "ekss/spectral.hpp"
#include "ekss/synth.hpp"

namespace ekss {

/// Threshold parameter rules used for the synthetic experiments:
/// q = max(3, ceil(N_k/20)) for EKSS-0 and TSC, q = max(3, ceil(N_k/6)) for EKSS.
inline int q_rule_ekss(int N_k) { return std::max(3, (N_k + 5) / 6); }
inline int q_rule_ekss0_tsc(int N_k) { return std::max(3, (N_k + 19) / 20); }

/// Evenly spaced values, optionally on a log axis.
inline std::vector<double> spaced_grid(double lo, double hi, int n, bool log_spacing) {
    if (n < 1 || lo > hi || (log_spacing && lo <= 0.0))
        throw std::invalid_argument("spaced_grid: invalid range");
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        g[i] = log_spacing ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                           : lo + t * (hi - lo);
    }
    return g;
}

struct ExperimentConfig {
    std::string mode;  // fig1_progression | grid_Nk_by_d | grid_Nk_by_theta |
                       // noisy_theta_sweep | theory_suite
    std::vector<std::string> algorithms = {"ekss", "ekss0", "tsc"};
    std::vector<int> Nk_grid;        // defaults per mode when empty
    std::vector<int> d_grid;
    std::vector<double> theta_grid;
    std::vector<int> B_progression = {1, 5, 50};  // progression mode
    int D = 100;
    int K = 3;
    int d_fixed = 10;   // subspace dimension for the theta modes
    double sigma = 0.0; // noisy_theta_sweep defaults to sqrt(0.05) when 0
    int trials = 10;
    int B = 1000;
    int T = 3;
    bool log_spacing = true;
    SeedSpec seed;
    std::string output_dir;
};

/// One measurement row of results.csv.
struct ExperimentRow {
    std::string algo;
    int N_k = 0;
    int d = 0;
    double theta = 0.0;
    double sigma = 0.0;
    int K = 0;
    int K_bar = 0;
    int d_bar = 0;
    int q = -1;  // -1 = no thresholding
    int B = 0;
    int T = 0;
    int trial = 0;
    double error_pct = 0.0;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline double run_algo_on_instance(const std::string& algo, const ProblemInstance& inst,
                                   int K, int K_bar, int d_bar, int q_ekss, int q_small,
                                   int B, int T, SeedSpec seed) {
    Labeling labels;
    if (algo == "ekss") {
        EkssParams p;
        p.K = K;
        p.K_bar = K_bar;
        p.d_bar = d_bar;
        p.q = q_ekss;
        p.B = B;
        p.T = T;
        p.seed = seed;
        labels = ekss(inst.data, p).labels;
    } else if (algo == "ekss0") {
        labels = ekss0(inst.data, K, K_bar, d_bar, q_small, B, seed).labels;
    } else if (algo == "tsc") {
        const Matrix A = tsc_affinity(inst.data, q_small);
        SpectralConfig cfg;
        cfg.K = K;
        cfg.seed = seed;
        labels = spectral_cluster(A, cfg);
    } else {
        throw std::invalid_argument("unknown algorithm: " + algo);
    }
    return clustering_error(labels, inst.true_labels);
}

inline void write_rows_csv(const std::string& path, const std::string& mode,
                           const std::vector<ExperimentRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "mode,algo,N_k,d,theta,sigma,K,K_bar,d_bar,q,B,T,trial,error_pct\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.10g,%.10g,%d,%d,%d,%d,%d,%d,%d,%.10g\n",
                      mode.c_str(), r.algo.c_str(), r.N_k, r.d, r.theta, r.sigma, r.K, r.K_bar,
                      r.d_bar, r.q, r.B, r.T, r.trial, r.error_pct);
        out << buf;
    }
}

inline void write_summary_csv(const std::string& path, const std::string& mode,
                              const std::vector<ExperimentRow>& rows) {
    // Mean over trials per (algo, grid cell, B).
    std::map<std::string, std::pair<double, int>> cells;
    std::vector<std::string> order;
    char key[512];
    for (const auto& r : rows) {
        std::snprintf(key, sizeof(key), "%s,%d,%d,%.10g,%.10g,%d,%d,%d,%d,%d,%d", r.algo.c_str(),
                      r.N_k, r.d, r.theta, r.sigma, r.K, r.K_bar, r.d_bar, r.q, r.B, r.T);
        auto [it, inserted] = cells.try_emplace(key, std::make_pair(0.0, 0));
        if (inserted) order.push_back(key);
        it->second.first += r.error_pct;
        it->second.second += 1;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "mode,algo,N_k,d,theta,sigma,K,K_bar,d_bar,q,B,T,trials,mean_error_pct\n";
    char buf[600];
    for (const auto& k : order) {
        const auto& [sum, n] = cells.at(k);
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.10g\n", mode.c_str(), k.c_str(), n, sum / n);
        out << buf;
    }
}

}  // namespace detail

struct TheoryCheck {
    std::string name;
    bool pass = false;
    nlohmann::json stats;
};

struct TheoryReport {
    std::vector<TheoryCheck> checks;
    bool all_pass = false;

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j;
        j["all_pass"] = all_pass;
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"stats", c.stats}});
        return j;
    }
};

/// Validates the testable consequences of the theory at desk scale:
///  1. closed form of the co-cluster probability for two random lines in the
///     plane, p(theta) = 1 - 2 theta / pi;
///  2. monotone decrease of the co-cluster probability in the angle;
///  3. O(1/sqrt(B)) concentration of co-association entries around the
///     reference curve;
///  4. exact recovery of block-structured affinities by spectral clustering.
inline TheoryReport theory_suite(SeedSpec seed) {
    constexpr std::int64_t kB = 100000;
    TheoryReport report;

    {  // 1. closed form for (K_bar, d_bar, D) = (2, 1, 2)
        const std::vector<double> thetas = {0.2, 0.6, 1.0, 1.4};
        bool pass = true;
        double max_dev = 0.0, se_at_max = 0.0, max_ratio = 0.0;
        nlohmann::json points = nlohmann::json::array();
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            const FEstimate est = estimate_f(thetas[i], 2, 1, 2, kB, seed.sub(100 + i));
            const double expected = 1.0 - 2.0 * thetas[i] / M_PI;
            const double dev = std::abs(est.p - expected);
            if (dev > max_dev) {
                max_dev = dev;
                se_at_max = est.std_err;
            }
            max_ratio = std::max(max_ratio, dev / est.std_err);
            if (dev > 3.0 * est.std_err) pass = false;
            points.push_back({{"theta", thetas[i]},
                              {"p_hat", est.p},
                              {"expected", expected},
                              {"std_err", est.std_err}});
        }
        report.checks.push_back({"cocluster_closed_form",
                                 pass,
                                 {{"B", kB},
                                  {"max_abs_dev", max_dev},
                                  {"std_err_at_max", se_at_max},
                                  {"max_dev_over_std_err", max_ratio},
                                  {"points", points}}});
    }

    {  // 2. monotonicity across an 8-angle grid for three candidate configs
        const std::vector<std::pair<int, int>> configs = {{2, 1}, {4, 3}, {3, 5}};
        const std::vector<double> thetas = spaced_grid(0.05, 1.5, 8, false);
        constexpr int D = 20;
        bool pass = true;
        double worst_margin = std::numeric_limits<double>::infinity();
        nlohmann::json curves = nlohmann::json::array();
        for (std::size_t c = 0; c < configs.size(); ++c) {
            std::vector<FEstimate> est(thetas.size());
            for (std::size_t i = 0; i < thetas.size(); ++i)
                est[i] = estimate_f(thetas[i], configs[c].first, configs[c].second, D, kB,
                                    seed.sub(200 + 10 * c + i));
            nlohmann::json ps = nlohmann::json::array();
            for (const auto& e : est) ps.push_back(e.p);
            curves.push_back({{"K_bar", configs[c].first},
                              {"d_bar", configs[c].second},
                              {"p_hat", ps}});
            for (std::size_t i = 0; i + 1 < est.size(); ++i) {
                const double combined =
                    std::sqrt(est[i].std_err * est[i].std_err +
                              est[i + 1].std_err * est[i + 1].std_err);
                const double margin = est[i].p - est[i + 1].p + 3.0 * combined;
                worst_margin = std::min(worst_margin, margin);
                if (margin < 0.0) pass = false;
            }
        }
        report.checks.push_back({"cocluster_monotonicity",
                                 pass,
                                 {{"B", kB},
                                  {"D", 20},
                                  {"thetas", thetas},
                                  {"worst_margin", worst_margin},
                                  {"curves", curves}}});
    }

    {  // 3. concentration: max co-association deviation shrinks like 1/sqrt(B)
        constexpr int D = 6, K_bar = 2, d_bar = 1, n_pts = 20, reps = 5;
        const std::vector<std::int64_t> Bs = {100, 1000, 10000};
        RandomStream data_rng(seed.sub(300));
        Matrix X(D, n_pts);
        for (int j = 0; j < n_pts; ++j) X.col(j) = data_rng.unit_sphere(D);

        std::vector<double> pair_thetas;
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < n_pts; ++i) {
            for (int j = i + 1; j < n_pts; ++j) {
                const double z = std::min(1.0, std::abs(X.col(i).dot(X.col(j))));
                pair_thetas.push_back(std::acos(z));
                pairs.emplace_back(i, j);
            }
        }
        const std::vector<FEstimate> ref =
            estimate_f_curve(pair_thetas, K_bar, d_bar, D, 1000000, seed.sub(301));

        std::vector<double> mean_dev(Bs.size(), 0.0);
        for (std::size_t bi = 0; bi < Bs.size(); ++bi) {
            for (int rep = 0; rep < reps; ++rep) {
                const SeedSpec run_seed = seed.sub(310 + 10 * bi + rep);
                std::vector<Labeling> labelings(Bs[bi]);
                parallel_for(static_cast<std::size_t>(Bs[bi]), [&](std::size_t b) {
                    RandomStream rng(run_seed.sub(b));
                    std::vector<Matrix> bases;
                    bases.reserve(K_bar);
                    for (int k = 0; k < K_bar; ++k)
                        bases.push_back(sample_stiefel(D, d_bar, rng));
                    labelings[b] = assign_by_projection(X, bases);
                });
                const Matrix A = accumulate(labelings);
                double dev = 0.0;
                for (std::size_t p = 0; p < pairs.size(); ++p)
                    dev = std::max(dev,
                                   std::abs(A(pairs[p].first, pairs[p].second) - ref[p].p));
                mean_dev[bi] += dev / reps;
            }
        }
        // Least-squares slope of log(dev) against log(B).
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < Bs.size(); ++i) {
            const double x = std::log(static_cast<double>(Bs[i]));
            const double y = std::log(mean_dev[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double n = static_cast<double>(Bs.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const bool pass = slope >= -0.65 && slope <= -0.35;
        report.checks.push_back({"affinity_concentration",
                                 pass,
                                 {{"B_values", Bs},
                                  {"mean_max_dev", mean_dev},
                                  {"replicates", reps},
                                  {"slope", slope},
                                  {"slope_range", {-0.65, -0.35}}}});
    }

    {  // 4. spectral recovery of block-structured affinities
        RandomStream rng(seed.sub(400));
        int recovered = 0;
        constexpr int cases = 50;
        for (int c = 0; c < cases; ++c) {
            const int K = 2 + static_cast<int>(rng.uniform_index(4));  // 2..5
            std::vector<int> sizes(K);
            int N = 0;
            for (int k = 0; k < K; ++k) {
                sizes[k] = 2 + static_cast<int>(rng.uniform_index(9));  // 2..10
                N += sizes[k];
            }
            Matrix A = Matrix::Zero(N, N);
            Labeling truth(N);
            int base = 0;
            for (int k = 0; k < K; ++k) {
                for (int i = 0; i < sizes[k]; ++i) truth[base + i] = k;
                // Random spanning tree plus extra edges, positive weights.
                for (int i = 1; i < sizes[k]; ++i) {
                    const int parent = static_cast<int>(rng.uniform_index(i));
                    const double w = 0.1 + 0.9 * rng.uniform();
                    A(base + i, base + parent) = A(base + parent, base + i) = w;
                }
                for (int i = 0; i < sizes[k]; ++i) {
                    for (int j = i + 1; j < sizes[k]; ++j) {
                        if (rng.uniform() < 0.3 && A(base + i, base + j) == 0.0) {
                            const double w = 0.1 + 0.9 * rng.uniform();
                            A(base + i, base + j) = A(base + j, base + i) = w;
                        }
                    }
                }
                base += sizes[k];
            }
            SpectralConfig cfg;
            cfg.K = K;
            cfg.seed = seed.sub(410 + c);
            const Labeling out = spectral_cluster(A, cfg);
            if (clustering_error(out, truth) == 0.0) ++recovered;
        }
        report.checks.push_back({"block_recovery",
                                 recovered == cases,
                                 {{"cases", cases}, {"recovered", recovered}}});
    }

    report.all_pass = true;
    for (const auto& c : report.checks) report.all_pass = report.all_pass && c.pass;
    return report;
}

/// Runs the configured experiment, writing results.csv and summary.csv (and
/// mode-specific artifacts) into cfg.output_dir. Returns the per-trial rows.
inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    detail::require(cfg.trials >= 1, "run_experiment: need trials >= 1");
    detail::require(!cfg.output_dir.empty(), "run_experiment: output_dir required");
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    std::vector<ExperimentRow> rows;

    if (cfg.mode == "theory_suite") {
        // Check failures are report entries, not errors; the CLI maps
        // all_pass onto its exit code.
        const TheoryReport report = theory_suite(cfg.seed);
        std::ofstream out(dir / "theory_report.json");
        if (!out) throw std::runtime_error("cannot write theory_report.json");
        out << report.to_json().dump(2) << '\n';
        return rows;
    }

    if (cfg.mode == "fig1_progression") {
        // D = 100, d = 3, K = K_bar = 4, N = 400, noiseless, no thresholding.
        constexpr int D = 100, K = 4, d = 3, N_k = 100, T = 3;
        detail::require(!cfg.B_progression.empty(), "fig1_progression: B list required");
        for (int t = 0; t < cfg.trials; ++t) {
            const SeedSpec trial_seed = cfg.seed.sub(t);
            const ProblemInstance inst = gen_random_uos(
                D, K, std::vector<int>(K, d), std::vector<int>(K, N_k), 0.0, trial_seed.sub(0));
            for (std::size_t a = 0; a < cfg.B_progression.size(); ++a) {
                const int B = cfg.B_progression[a];
                EkssParams p;
                p.K = K;
                p.K_bar = K;
                p.d_bar = d;
                p.q = std::nullopt;
                p.B = B;
                p.T = T;
                p.seed = trial_seed.sub(1 + a);
                const EkssResult res = ekss(inst.data, p);
                if (t == 0)
                    save_matrix_csv((dir / ("coassoc_B" + std::to_string(B) + ".csv")).string(),
                                    res.coassociation);
                rows.push_back({"ekss", N_k, d, 0.0, 0.0, K, K, d, -1, B, T, t,
                                clustering_error(res.labels, inst.true_labels)});
            }
        }
    } else if (cfg.mode == "grid_Nk_by_d" || cfg.mode == "grid_Nk_by_theta" ||
               cfg.mode == "noisy_theta_sweep") {
        std::vector<int> Nk_grid = cfg.Nk_grid;
        std::vector<int> d_grid = cfg.d_grid;
        std::vector<double> theta_grid = cfg.theta_grid;
        double sigma = cfg.sigma;
        const bool by_d = cfg.mode == "grid_Nk_by_d";
        if (cfg.mode == "noisy_theta_sweep") {
            if (Nk_grid.empty()) Nk_grid = {500};
            if (sigma == 0.0) sigma = std::sqrt(0.05);
        }
        if (Nk_grid.empty())
            for (double v : spaced_grid(10, 500, 8, cfg.log_spacing))
                Nk_grid.push_back(static_cast<int>(std::lround(v)));
        if (by_d) {
            if (d_grid.empty())
                for (double v : spaced_grid(1, 75, 8, cfg.log_spacing))
                    d_grid.push_back(static_cast<int>(std::lround(v)));
            theta_grid = {0.0};
        } else {
            if (theta_grid.empty()) theta_grid = spaced_grid(0.001, 0.8, 8, cfg.log_spacing);
            d_grid = {cfg.d_fixed};
        }

        struct Item {
            int N_k, d, trial;
            double theta;
        };
        std::vector<Item> items;
        for (int N_k : Nk_grid)
            for (int d : d_grid)
                for (double theta : theta_grid)
                    for (int t = 0; t < cfg.trials; ++t) items.push_back({N_k, d, t, theta});

        std::vector<std::vector<ExperimentRow>> slots(items.size());
        std::vector<SeedSpec> item_seeds(items.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            item_seeds[i] = cfg.seed.sub(i);

        parallel_for(items.size(), [&](std::size_t i) {
            const Item& it = items[i];
            const SeedSpec inst_seed = item_seeds[i].sub(0);
            ProblemInstance inst =
                by_d ? gen_random_uos(cfg.D, cfg.K, std::vector<int>(cfg.K, it.d),
                                      std::vector<int>(cfg.K, it.N_k), sigma, inst_seed)
                     : gen_angled_uos(cfg.D, it.d, it.theta,
                                      std::vector<int>(3, it.N_k), sigma, inst_seed);
            const int K = by_d ? cfg.K : 3;
            for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
                const std::string& algo = cfg.algorithms[a];
                const int q_e = q_rule_ekss(it.N_k), q_s = q_rule_ekss0_tsc(it.N_k);
                const double err =
                    detail::run_algo_on_instance(algo, inst, K, K, it.d, q_e, q_s, cfg.B,
                                                 cfg.T, item_seeds[i].sub(1 + a));
                ExperimentRow row;
                row.algo = algo;
                row.N_k = it.N_k;
                row.d = it.d;
                row.theta = it.theta;
                row.sigma = sigma;
                row.K = K;
                row.K_bar = K;
                row.d_bar = it.d;
                row.q = algo == "ekss" ? q_e : q_s;
                row.B = cfg.B;
                row.T = algo == "ekss0" ? 0 : cfg.T;
                row.trial = it.trial;
                row.error_pct = err;
                slots[i].push_back(std::move(row));
            }
        });
        for (auto& s : slots)
            for (auto& r : s) rows.push_back(std::move(r));
    } else {
        throw std::invalid_argument("unknown experiment mode: " + cfg.mode);
    }

    detail::write_rows_csv((dir / "results.csv").string(), cfg.mode, rows);
    detail::write_summary_csv((dir / "summary.csv").string(), cfg.mode, rows);
    return rows;
}

}  // namespace ekss
