// Command-line harness for the EKSS subspace-clustering toolkit.
//
// Subcommands:
//   generate    synthesize a union-of-subspaces instance (data.csv,
//               labels.csv, instance.json)
//   cluster     run ekss / ekss0 / tsc on a data CSV
//   evaluate    score output labels against ground truth (JSON report)
//   experiment  grid experiments over problem parameters (tidy CSV output)
//   theory      desk-scale validation of the theoretical claims
//
// Exit codes: 0 success, 1 usage error, 2 theory-check failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ekss/ekss.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ekss::SeedSpec make_seed(std::uint64_t master, std::uint64_t stream) {
    return ekss::SeedSpec{master, stream};
}

std::optional<int> parse_q(const std::string& q_str) {
    if (q_str == "none") return std::nullopt;
    try {
        const int q = std::stoi(q_str);
        if (q < 1) throw std::invalid_argument("q");
        return q;
    } catch (const std::exception&) {
        throw CLI::ValidationError("--q must be a positive integer or \"none\"");
    }
}

int cmd_generate(const std::string& mode, int D, int K, int d, int N_k, double sigma,
                 double theta, int missing_s, std::uint64_t seed, std::uint64_t stream,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    ekss::ProblemInstance inst;
    if (mode == "random") {
        inst = ekss::gen_random_uos(D, K, std::vector<int>(K, d), std::vector<int>(K, N_k),
                                    sigma, make_seed(seed, stream));
    } else {
        inst = ekss::gen_angled_uos(D, d, theta, std::vector<int>(3, N_k), sigma,
                                    make_seed(seed, stream));
    }
    if (missing_s > 0)
        inst = ekss::apply_missing(inst, missing_s, make_seed(seed, stream + 1));
    const fs::path dir(out_dir);
    ekss::save_matrix_csv((dir / "data.csv").string(), inst.data);
    ekss::save_labels_csv((dir / "labels.csv").string(), inst.true_labels);
    ekss::save_instance_json((dir / "instance.json").string(), inst);
    std::cout << "wrote " << (dir / "data.csv").string() << " ("
              << inst.data.rows() << "x" << inst.data.cols() << "), labels.csv, instance.json\n";
    return 0;
}

int cmd_cluster(const std::string& algo, const std::string& data_path, int K, int K_bar,
                int d_bar, const std::string& q_str, int B, int T, std::uint64_t seed,
                std::uint64_t stream, bool weighted, const std::string& labels_out,
                const std::string& affinity_out, const std::string& coassoc_out) {
    const ekss::Matrix data = ekss::load_matrix_csv(data_path);
    const std::optional<int> q = parse_q(q_str);
    ekss::Labeling labels;
    ekss::Matrix affinity;
    ekss::Matrix coassoc;

    if (algo == "tsc") {
        if (!q) throw CLI::ValidationError("tsc requires an integer --q");
        affinity = ekss::tsc_affinity(data, *q);
        ekss::SpectralConfig cfg;
        cfg.K = K;
        cfg.seed = make_seed(seed, stream);
        labels = ekss::spectral_cluster(affinity, cfg);
    } else {
        ekss::EkssParams p;
        p.K = K;
        p.K_bar = K_bar;
        p.d_bar = d_bar;
        p.q = q;
        p.B = B;
        p.T = algo == "ekss0" ? 0 : T;
        p.weighted = algo == "ekss0" ? false : weighted;
        p.seed = make_seed(seed, stream);
        ekss::EkssResult res = ekss::ekss(data, p);
        labels = std::move(res.labels);
        affinity = std::move(res.affinity);
        coassoc = std::move(res.coassociation);
    }

    ekss::save_labels_csv(labels_out, labels);
    std::cout << "wrote " << labels_out << "\n";
    if (!affinity_out.empty()) {
        ekss::save_matrix_csv(affinity_out, affinity);
        std::cout << "wrote " << affinity_out << "\n";
    }
    if (!coassoc_out.empty() && coassoc.size() > 0) {
        ekss::save_matrix_csv(coassoc_out, coassoc);
        std::cout << "wrote " << coassoc_out << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& labels_path, const std::string& truth_path,
                 const std::string& affinity_path, const std::string& data_path,
                 const std::string& instance_path, int q, const std::string& out_path) {
    const ekss::Labeling out = ekss::load_labels_csv(labels_path);
    const ekss::Labeling truth = ekss::load_labels_csv(truth_path);

    json report;
    report["clustering_error_pct"] = ekss::clustering_error(out, truth);
    report["nfc"] = nullptr;
    report["num_components"] = nullptr;
    report["phi_q"] = nullptr;
    report["pairwise_aff"] = nullptr;

    if (!affinity_path.empty()) {
        const ekss::Matrix A = ekss::load_matrix_csv(affinity_path);
        const ekss::NfcResult nfc = ekss::nfc_check(A, truth);
        report["nfc"] = nfc.no_false_connections;
        json viol = json::array();
        for (auto [i, j] : nfc.violations) viol.push_back({i, j});
        report["nfc_violations"] = viol;
        report["num_components"] = ekss::connected_components(A).second;
    }
    if (!data_path.empty()) {
        const ekss::Matrix data = ekss::load_matrix_csv(data_path);
        report["phi_q"] = ekss::angular_separation(data, truth, q);
    }
    if (!instance_path.empty()) {
        const ekss::ProblemInstance inst = ekss::load_instance_json(instance_path);
        const std::size_t K = inst.true_bases.size();
        json aff = json::array();
        for (std::size_t k = 0; k < K; ++k) {
            json row = json::array();
            for (std::size_t l = 0; l < K; ++l)
                row.push_back(
                    ekss::subspace_affinity(inst.true_bases[k], inst.true_bases[l]));
            aff.push_back(std::move(row));
        }
        report["pairwise_aff"] = std::move(aff);
    }

    const std::string text = report.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out_path);
        f << text;
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

void apply_config_file(const std::string& path, ekss::ExperimentConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("cannot open config file: " + path);
    json j;
    in >> j;
    if (j.contains("mode")) cfg.mode = j["mode"].get<std::string>();
    if (j.contains("algorithms")) cfg.algorithms = j["algorithms"].get<std::vector<std::string>>();
    if (j.contains("Nk_grid")) cfg.Nk_grid = j["Nk_grid"].get<std::vector<int>>();
    if (j.contains("d_grid")) cfg.d_grid = j["d_grid"].get<std::vector<int>>();
    if (j.contains("theta_grid")) cfg.theta_grid = j["theta_grid"].get<std::vector<double>>();
    if (j.contains("B_progression"))
        cfg.B_progression = j["B_progression"].get<std::vector<int>>();
    if (j.contains("D")) cfg.D = j["D"].get<int>();
    if (j.contains("K")) cfg.K = j["K"].get<int>();
    if (j.contains("d_fixed")) cfg.d_fixed = j["d_fixed"].get<int>();
    if (j.contains("sigma")) cfg.sigma = j["sigma"].get<double>();
    if (j.contains("trials")) cfg.trials = j["trials"].get<int>();
    if (j.contains("B")) cfg.B = j["B"].get<int>();
    if (j.contains("T")) cfg.T = j["T"].get<int>();
    if (j.contains("log_spacing")) cfg.log_spacing = j["log_spacing"].get<bool>();
    if (j.contains("seed")) cfg.seed.master_seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble K-subspaces clustering toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Synthesize a union-of-subspaces instance");
    std::string g_mode = "random", g_out = ".";
    int g_D = 100, g_K = 3, g_d = 5, g_Nk = 100, g_missing = 0;
    double g_sigma = 0.0, g_theta = 0.5;
    std::uint64_t g_seed = 0, g_stream = 0;
    gen->add_option("--mode", g_mode, "random | angled")
        ->check(CLI::IsMember({"random", "angled"}));
    gen->add_option("--D", g_D, "ambient dimension");
    gen->add_option("--K", g_K, "number of subspaces (angled mode fixes K = 3)");
    gen->add_option("--d", g_d, "subspace dimension");
    gen->add_option("--Nk", g_Nk, "points per subspace");
    gen->add_option("--sigma", g_sigma, "noise level (E||e||^2 = sigma^2)");
    gen->add_option("--theta", g_theta, "principal angle (angled mode)");
    gen->add_option("--missing", g_missing, "unobserved entries per point");
    gen->add_option("--seed", g_seed, "master seed");
    gen->add_option("--stream", g_stream, "stream id");
    gen->add_option("--out-dir", g_out, "output directory");

    // cluster
    auto* clu = app.add_subcommand("cluster", "Cluster a data CSV");
    std::string c_algo = "ekss", c_data, c_q = "none", c_labels = "labels_out.csv";
    std::string c_affinity, c_coassoc;
    int c_K = 3, c_Kbar = 3, c_dbar = 5, c_B = 100, c_T = 3;
    std::uint64_t c_seed = 0, c_stream = 0;
    bool c_weighted = false;
    clu->add_option("--algo", c_algo, "ekss | ekss0 | tsc")
        ->check(CLI::IsMember({"ekss", "ekss0", "tsc"}));
    clu->add_option("--data", c_data, "input data CSV (D rows, N columns)")->required();
    clu->add_option("--K", c_K, "output clusters");
    clu->add_option("--Kbar", c_Kbar, "candidate subspaces per base clustering");
    clu->add_option("--dbar", c_dbar, "candidate dimension");
    clu->add_option("--q", c_q, "threshold parameter (integer or \"none\")");
    clu->add_option("--B", c_B, "number of base clusterings");
    clu->add_option("--T", c_T, "KSS iterations");
    clu->add_option("--seed", c_seed, "master seed");
    clu->add_option("--stream", c_stream, "stream id");
    clu->add_flag("--weighted", c_weighted, "weight votes by clustering quality");
    clu->add_option("--labels-out", c_labels, "output labels CSV");
    clu->add_option("--affinity-out", c_affinity, "write the affinity fed to spectral");
    clu->add_option("--coassoc-out", c_coassoc, "write the raw co-association matrix");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score labels against ground truth");
    std::string e_labels, e_truth, e_affinity, e_data, e_instance, e_out;
    int e_q = 3;
    ev->add_option("--labels", e_labels, "output labels CSV")->required();
    ev->add_option("--truth", e_truth, "ground-truth labels CSV")->required();
    ev->add_option("--affinity", e_affinity, "affinity CSV for NFC / components");
    ev->add_option("--data", e_data, "data CSV for the q-angular separation");
    ev->add_option("--instance", e_instance, "instance.json for pairwise affinities");
    ev->add_option("--q", e_q, "q for the angular separation");
    ev->add_option("--out", e_out, "write report JSON here instead of stdout");

    // experiment
    auto* ex = app.add_subcommand("experiment", "Run a parameter-grid experiment");
    ekss::ExperimentConfig cfg;
    std::string x_config;
    std::uint64_t x_seed = 0;
    ex->add_option("--mode", cfg.mode,
                   "fig1_progression | grid_Nk_by_d | grid_Nk_by_theta | "
                   "noisy_theta_sweep | theory_suite");
    ex->add_option("--algos", cfg.algorithms, "subset of {ekss, ekss0, tsc}");
    ex->add_option("--Nk-grid", cfg.Nk_grid, "points-per-subspace grid");
    ex->add_option("--d-grid", cfg.d_grid, "subspace-dimension grid");
    ex->add_option("--theta-grid", cfg.theta_grid, "angle grid");
    ex->add_option("--B-progression", cfg.B_progression, "B values for the progression mode");
    ex->add_option("--D", cfg.D, "ambient dimension");
    ex->add_option("--K", cfg.K, "number of subspaces");
    ex->add_option("--d-fixed", cfg.d_fixed, "subspace dimension for theta modes");
    ex->add_option("--sigma", cfg.sigma, "noise level");
    ex->add_option("--trials", cfg.trials, "trials per grid cell");
    ex->add_option("--B", cfg.B, "ensemble size");
    ex->add_option("--T", cfg.T, "KSS iterations for EKSS");
    bool x_linear = false;
    ex->add_flag("--linear-spacing", x_linear, "use linear default grids");
    ex->add_option("--seed", x_seed, "master seed");
    ex->add_option("--out-dir", cfg.output_dir, "output directory");
    ex->add_option("--config", x_config, "JSON config file (flags override)");

    // theory
    auto* th = app.add_subcommand("theory", "Run the theory-validation suite");
    std::uint64_t t_seed = 0;
    std::string t_out;
    th->add_option("--seed", t_seed, "master seed");
    th->add_option("--out", t_out, "write report JSON here (also printed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed())
            return cmd_generate(g_mode, g_D, g_K, g_d, g_Nk, g_sigma, g_theta, g_missing,
                                g_seed, g_stream, g_out);
        if (clu->parsed())
            return cmd_cluster(c_algo, c_data, c_K, c_Kbar, c_dbar, c_q, c_B, c_T, c_seed,
                               c_stream, c_weighted, c_labels, c_affinity, c_coassoc);
        if (ev->parsed())
            return cmd_evaluate(e_labels, e_truth, e_affinity, e_data, e_instance, e_q, e_out);
        if (ex->parsed()) {
            if (!x_config.empty()) {
                // Config file supplies defaults; explicitly passed flags win.
                const ekss::ExperimentConfig from_flags = cfg;
                apply_config_file(x_config, cfg);
                auto keep = [&](const char* name, auto member) {
                    if (ex->count(name)) cfg.*member = from_flags.*member;
                };
                keep("--mode", &ekss::ExperimentConfig::mode);
                keep("--algos", &ekss::ExperimentConfig::algorithms);
                keep("--Nk-grid", &ekss::ExperimentConfig::Nk_grid);
                keep("--d-grid", &ekss::ExperimentConfig::d_grid);
                keep("--theta-grid", &ekss::ExperimentConfig::theta_grid);
                keep("--B-progression", &ekss::ExperimentConfig::B_progression);
                keep("--D", &ekss::ExperimentConfig::D);
                keep("--K", &ekss::ExperimentConfig::K);
                keep("--d-fixed", &ekss::ExperimentConfig::d_fixed);
                keep("--sigma", &ekss::ExperimentConfig::sigma);
                keep("--trials", &ekss::ExperimentConfig::trials);
                keep("--B", &ekss::ExperimentConfig::B);
                keep("--T", &ekss::ExperimentConfig::T);
                keep("--out-dir", &ekss::ExperimentConfig::output_dir);
            }
            if (ex->count("--seed")) cfg.seed = make_seed(x_seed, 0);
            if (x_linear) cfg.log_spacing = false;
            if (cfg.mode.empty())
                throw CLI::ValidationError("--mode (or a config file setting it) is required");
            if (cfg.output_dir.empty()) cfg.output_dir = "experiment_out";
            if (cfg.mode == "theory_suite") {
                fs::create_directories(cfg.output_dir);
                const ekss::TheoryReport report = ekss::theory_suite(cfg.seed);
                std::ofstream out(fs::path(cfg.output_dir) / "theory_report.json");
                out << report.to_json().dump(2) << '\n';
                std::cout << report.to_json().dump(2) << '\n';
                return report.all_pass ? 0 : 2;
            }
            const auto rows = ekss::run_experiment(cfg);
            std::cout << "wrote " << rows.size() << " measurement rows to " << cfg.output_dir
                      << "/results.csv\n";
            return 0;
        }
        if (th->parsed()) {
            const ekss::TheoryReport report = ekss::theory_suite(make_seed(t_seed, 0));
            const std::string text = report.to_json().dump(2) + "\n";
            std::cout << text;
            if (!t_out.empty()) {
                std::ofstream out(t_out);
                out << text;
            }
            return report.all_pass ? 0 : 2;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
