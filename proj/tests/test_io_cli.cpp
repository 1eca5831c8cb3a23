#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "ekss/experiment.hpp"
#include "ekss/io.hpp"
#include "ekss/synth.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using ekss::Matrix;
using ekss::SeedSpec;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ekss_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + EKSS_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("matrix CSV round trip preserves values exactly") {
    TempDir tmp;
    ekss::RandomStream rng(SeedSpec{100, 0});
    const Matrix M = rng.gaussian_matrix(7, 11);
    const auto path = (tmp.path / "m.csv").string();
    ekss::save_matrix_csv(path, M);
    const Matrix back = ekss::load_matrix_csv(path);
    REQUIRE(back.rows() == M.rows());
    REQUIRE(back.cols() == M.cols());
    REQUIRE(back == M);  // %.17g round-trips doubles
}

TEST_CASE("matrix CSV loader validates its input") {
    TempDir tmp;
    SECTION("ragged rows") {
        const auto path = (tmp.path / "ragged.csv").string();
        std::ofstream(path) << "1,2,3\n4,5\n";
        REQUIRE_THROWS_AS(ekss::load_matrix_csv(path), std::runtime_error);
    }
    SECTION("non-numeric cell") {
        const auto path = (tmp.path / "alpha.csv").string();
        std::ofstream(path) << "1,2\n3,zebra\n";
        REQUIRE_THROWS_AS(ekss::load_matrix_csv(path), std::runtime_error);
    }
    SECTION("non-finite entry") {
        const auto path = (tmp.path / "inf.csv").string();
        std::ofstream(path) << "1,2\n3,inf\n";
        REQUIRE_THROWS_AS(ekss::load_matrix_csv(path), std::runtime_error);
    }
    SECTION("empty file") {
        const auto path = (tmp.path / "empty.csv").string();
        std::ofstream(path) << "";
        REQUIRE_THROWS_AS(ekss::load_matrix_csv(path), std::runtime_error);
    }
}

TEST_CASE("labels CSV round trip") {
    TempDir tmp;
    const ekss::Labeling labels{0, 2, 1, 1, 0};
    const auto path = (tmp.path / "labels.csv").string();
    ekss::save_labels_csv(path, labels);
    REQUIRE(ekss::load_labels_csv(path) == labels);
}

TEST_CASE("instance JSON round trip preserves bases and masks") {
    TempDir tmp;
    auto inst = ekss::gen_random_uos(8, 2, {2, 3}, {4, 5}, 0.1, SeedSpec{101, 0});
    inst = ekss::apply_missing(inst, 2, SeedSpec{101, 1});
    const auto path = (tmp.path / "instance.json").string();
    ekss::save_instance_json(path, inst);
    const auto back = ekss::load_instance_json(path);
    REQUIRE(back.true_bases.size() == 2);
    for (int k = 0; k < 2; ++k) REQUIRE(back.true_bases[k] == inst.true_bases[k]);
    REQUIRE(back.noise_sigma == inst.noise_sigma);
    REQUIRE(back.missing_mask.has_value());
    REQUIRE(*back.missing_mask == *inst.missing_mask);
    REQUIRE(back.config.kind == "random");
    REQUIRE(back.config.seed.master_seed == 101);
}

TEST_CASE("experiment runs are byte-identical given the seed") {
    TempDir tmp;
    ekss::ExperimentConfig cfg;
    cfg.mode = "grid_Nk_by_d";
    cfg.algorithms = {"ekss0", "tsc"};
    cfg.Nk_grid = {20};
    cfg.d_grid = {2};
    cfg.D = 20;
    cfg.K = 2;
    cfg.trials = 1;
    cfg.B = 30;
    cfg.seed = SeedSpec{102, 0};
    cfg.output_dir = (tmp.path / "run1").string();
    ekss::run_experiment(cfg);
    cfg.output_dir = (tmp.path / "run2").string();
    ekss::run_experiment(cfg);
    REQUIRE(slurp(tmp.path / "run1" / "results.csv") ==
            slurp(tmp.path / "run2" / "results.csv"));
    REQUIRE(slurp(tmp.path / "run1" / "summary.csv") ==
            slurp(tmp.path / "run2" / "summary.csv"));
    REQUIRE(!slurp(tmp.path / "run1" / "results.csv").empty());

    // Header row is self-describing.
    std::ifstream in(tmp.path / "run1" / "results.csv");
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "mode,algo,N_k,d,theta,sigma,K,K_bar,d_bar,q,B,T,trial,error_pct");
}

TEST_CASE("cli generate, cluster, evaluate round trip") {
    TempDir tmp;
    const std::string dir = tmp.path.string();
    REQUIRE(run_cli("generate --mode random --D 20 --K 2 --d 2 --Nk 20 --seed 7 --out-dir " +
                    dir) == 0);
    REQUIRE(fs::exists(tmp.path / "data.csv"));
    REQUIRE(fs::exists(tmp.path / "labels.csv"));
    REQUIRE(fs::exists(tmp.path / "instance.json"));

    REQUIRE(run_cli("cluster --algo ekss --data " + dir + "/data.csv --K 2 --Kbar 2 --dbar 2 " +
                    "--B 30 --T 3 --seed 1 --labels-out " + dir + "/out.csv --affinity-out " +
                    dir + "/aff.csv") == 0);
    REQUIRE(fs::exists(tmp.path / "out.csv"));

    const std::string report_path = dir + "/report.json";
    REQUIRE(run_cli("evaluate --labels " + dir + "/out.csv --truth " + dir +
                    "/labels.csv --affinity " + dir + "/aff.csv --data " + dir +
                    "/data.csv --q 3 --instance " + dir + "/instance.json --out " +
                    report_path) == 0);
    nlohmann::json report;
    std::ifstream(report_path) >> report;
    REQUIRE(report.contains("clustering_error_pct"));
    REQUIRE(report["clustering_error_pct"].get<double>() == 0.0);
    REQUIRE(report.contains("nfc"));
    REQUIRE(report.contains("num_components"));
    REQUIRE(report.contains("phi_q"));
    REQUIRE(report["pairwise_aff"].is_array());
}

TEST_CASE("cli rejects bad usage with exit code 1") {
    REQUIRE(run_cli("cluster --algo bogus --data nowhere.csv") == 1);
    REQUIRE(run_cli("evaluate --labels nope.csv --truth nope.csv") == 1);
    REQUIRE(run_cli("experiment --mode not_a_mode --out-dir /tmp/ekss_nope") == 1);
}

TEST_CASE("cli experiment accepts a JSON config with flag overrides") {
    TempDir tmp;
    const std::string dir = tmp.path.string();
    const std::string cfg_path = dir + "/cfg.json";
    {
        nlohmann::json j;
        j["mode"] = "grid_Nk_by_d";
        j["algorithms"] = {"tsc"};
        j["Nk_grid"] = {15};
        j["d_grid"] = {2};
        j["D"] = 15;
        j["K"] = 2;
        j["trials"] = 3;  // overridden by the flag below
        j["seed"] = 11;
        j["output_dir"] = dir + "/exp";
        std::ofstream(cfg_path) << j.dump();
    }
    REQUIRE(run_cli("experiment --config " + cfg_path + " --trials 2") == 0);
    std::ifstream in(tmp.path / "exp" / "results.csv");
    REQUIRE(in.good());
    std::string line;
    int data_rows = 0;
    std::getline(in, line);  // header
    while (std::getline(in, line))
        if (!line.empty()) ++data_rows;
    REQUIRE(data_rows == 2);  // trials flag won over the config value
}

TEST_CASE("cli cluster is deterministic across runs") {
    TempDir tmp;
    const std::string dir = tmp.path.string();
    REQUIRE(run_cli("generate --mode angled --D 12 --d 2 --Nk 10 --theta 0.5 --seed 3 "
                    "--out-dir " + dir) == 0);
    REQUIRE(run_cli("cluster --algo ekss0 --data " + dir + "/data.csv --K 3 --Kbar 3 --dbar 2 "
                    "--q 3 --B 40 --seed 5 --labels-out " + dir + "/a.csv") == 0);
    REQUIRE(run_cli("cluster --algo ekss0 --data " + dir + "/data.csv --K 3 --Kbar 3 --dbar 2 "
                    "--q 3 --B 40 --seed 5 --labels-out " + dir + "/b.csv") == 0);
    REQUIRE(slurp(tmp.path / "a.csv") == slurp(tmp.path / "b.csv"));
}
