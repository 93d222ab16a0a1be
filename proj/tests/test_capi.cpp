// Exercises the C interface through the shared library alone: handle
// lifecycle, error codes and messages, closed-form spot values, and a full
// experiment run driven from JSON text.

#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "wqed/wqed.h"

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("wqed_capi_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

}  // namespace

TEST_CASE("version and error-state basics") {
    REQUIRE(wqed_version() != nullptr);
    CHECK(std::strcmp(wqed_version(), "v0.1.0") == 0);
    wqed_model_free(nullptr);  // free of NULL is a no-op
}

TEST_CASE("model lifecycle: ground state and cloud profile") {
    wqed_model_params params{};
    params.L = 9;
    params.n_max = 2;
    params.epsilon = 1.0;
    params.J = 1.0 / kPi;
    params.Delta = 1.0;
    params.g = 0.5;
    params.rwa = 0;

    wqed_model* model = nullptr;
    REQUIRE(wqed_model_create(&params, &model) == WQED_OK);
    REQUIRE(model != nullptr);

    // profile before solving is a configuration error
    CHECK(wqed_model_cloud_profile(model, nullptr, nullptr, nullptr) == WQED_ERR_CONFIG);
    CHECK(std::strlen(wqed_last_error()) > 0);

    double energy = 0.0, residual = 1.0;
    REQUIRE(wqed_model_ground_state(model, 1, &energy, &residual) == WQED_OK);
    CHECK(energy < -1e-6);  // counter-rotating terms push the minimum down
    CHECK(residual < 1e-9);

    std::vector<double> density(params.L, -1.0);
    double qubit = -1.0, total = -1.0;
    REQUIRE(wqed_model_cloud_profile(model, density.data(), &qubit, &total) == WQED_OK);
    CHECK(qubit > 0.0);
    CHECK(qubit < 1.0);
    double sum = 0.0;
    int imax = 0;
    for (int i = 0; i < params.L; ++i) {
        sum += density[i];
        if (density[i] > density[imax]) imax = i;
    }
    CHECK(std::abs(sum - total) < 1e-10);
    CHECK(imax == (params.L - 1) / 2);  // cloud peaks at the scatterer site

    // NULL outputs are allowed
    CHECK(wqed_model_ground_state(model, 1, nullptr, nullptr) == WQED_OK);
    wqed_model_free(model);
}

TEST_CASE("model creation rejects bad parameters with a message") {
    wqed_model_params params{};
    params.L = 10;  // must be odd
    params.n_max = 2;
    params.epsilon = 1.0;
    params.J = 1.0 / kPi;
    params.Delta = 1.0;
    wqed_model* model = nullptr;
    CHECK(wqed_model_create(&params, &model) == WQED_ERR_CONFIG);
    CHECK(model == nullptr);
    CHECK(std::string(wqed_last_error()).find("L") != std::string::npos);
    CHECK(wqed_model_create(nullptr, &model) == WQED_ERR_CONFIG);
}

TEST_CASE("envelope values") {
    wqed_envelope env{};
    env.kind = 0;  // Gaussian
    env.k_bar = 1.3;
    env.sigma = 0.05;
    double re = 0.0, im = 1.0;
    REQUIRE(wqed_envelope_value(&env, env.k_bar, &re, &im) == WQED_OK);
    CHECK(std::abs(re - std::pow(2.0 * kPi, -0.25) / std::sqrt(env.sigma)) < 1e-12);
    CHECK(std::abs(im) < 1e-14);

    env.kind = 1;  // Lorentzian: value at the center is -i / sqrt(pi sigma)
    REQUIRE(wqed_envelope_value(&env, env.k_bar, &re, &im) == WQED_OK);
    CHECK(std::abs(re) < 1e-14);
    CHECK(std::abs(im + 1.0 / std::sqrt(kPi * env.sigma)) < 1e-12);

    env.kind = 7;
    CHECK(wqed_envelope_value(&env, 0.0, &re, &im) == WQED_ERR_CONFIG);
}

TEST_CASE("free commutator: Gaussian/linear closed form") {
    wqed_commutator_args args{};
    args.env1.kind = 0;
    args.env1.k_bar = kPi / 2;
    args.env1.sigma = 0.1;
    args.env2 = args.env1;
    args.dispersion = 0;  // linear
    args.c = 1.0;
    args.x1 = 4.0;

    double re = 0.0, im = 0.0, dc = 0.0;
    REQUIRE(wqed_free_commutator(&args, &re, &im, &dc) == WQED_OK);
    CHECK(std::abs(dc - 4.0) < 1e-12);
    const std::complex<double> want =
        std::exp(std::complex<double>(0.0, args.env1.k_bar * 4.0)) *
        std::exp(-args.env1.sigma * args.env1.sigma * 16.0 / 2.0);
    CHECK(std::abs(std::complex<double>(re, im) - want) < 1e-8);
}

TEST_CASE("transmission matrix at resonance") {
    const double e_ground = 0.0, e_excited = 1.0;
    const double c_re = 0.3, c_im = 0.0;
    double t_re = 0.0, t_im = 0.0, defect = 1.0;
    REQUIRE(wqed_tmatrix(1, 1, &e_ground, &e_excited, &c_re, &c_im, 1.0, &t_re, &t_im,
                         &defect) == WQED_OK);
    CHECK(std::abs(t_re + 1.0) < 1e-10);  // t(resonance) = -1
    CHECK(std::abs(t_im) < 1e-10);
    CHECK(defect < 1e-12);

    CHECK(wqed_tmatrix(0, 1, &e_ground, &e_excited, &c_re, &c_im, 1.0, nullptr, nullptr,
                       nullptr) == WQED_ERR_CONFIG);
    CHECK(wqed_tmatrix(1, 1, nullptr, &e_excited, &c_re, &c_im, 1.0, nullptr, nullptr,
                       nullptr) == WQED_ERR_CONFIG);
}

TEST_CASE("experiment runner: artifacts, overrides, and failure codes") {
    TempDir dir;
    const std::string cfg = R"({
        "command": "groundstate",
        "groundstate": {"lattice": {"L": 9, "n_max": 2, "g": 0.4, "rwa": false}}
    })";

    REQUIRE(wqed_run_config(cfg.c_str(), dir.path.c_str(), 7, 1, "groundstate") == WQED_OK);
    CHECK(fs::exists(dir.path / "manifest.json"));
    CHECK(fs::exists(dir.path / "cloud.csv"));
    CHECK(fs::exists(dir.path / "report.json"));
    CHECK(fs::exists(dir.path / "plots.gp"));

    // the manifest reflects the seed override
    std::ifstream in(dir.path / "manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    CHECK(manifest.at("seed").get<int>() == 7);
    CHECK(manifest.at("version").get<std::string>() == wqed_version());

    // command expectation mismatch
    CHECK(wqed_run_config(cfg.c_str(), dir.path.c_str(), -1, 0, "scatter") ==
          WQED_ERR_CONFIG);
    CHECK(std::string(wqed_last_error()).find("groundstate") != std::string::npos);

    // malformed document and missing file
    CHECK(wqed_run_config("{", dir.path.c_str(), -1, 0, nullptr) == WQED_ERR_CONFIG);
    CHECK(wqed_run_config_file("/nonexistent/cfg.json", nullptr, -1, 0, nullptr) ==
          WQED_ERR_IO);
}
