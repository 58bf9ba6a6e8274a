#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "adsim/adsim.h"

TEST_CASE("version and error surface") {
    CHECK(adsim_version() != nullptr);
    CHECK(std::strlen(adsim_version()) > 0);

    adsim_profile* p = nullptr;
    CHECK(adsim_profile_builtin("no-such-backend", &p) != ADSIM_OK);
    CHECK(std::strlen(adsim_last_error()) > 0);
    CHECK(adsim_profile_builtin(nullptr, &p) == ADSIM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("estimator reproduces the crossover numbers") {
    adsim_profile* cpu = nullptr;
    REQUIRE(adsim_profile_builtin("cpu-tf", &cpu) == ADSIM_OK);

    double t_ev = 0.0;
    REQUIRE(adsim_estimate_t_ev(cpu, 16384, &t_ev) == ADSIM_OK);
    CHECK(t_ev == doctest::Approx(0.0194));

    double tbf = 0.0;
    REQUIRE(adsim_estimate_t_bf(1, 842600.0, &tbf) == ADSIM_OK);
    CHECK(tbf == doctest::Approx(1.1868e-6).epsilon(1e-4));

    double tfill = 0.0;
    REQUIRE(adsim_estimate_t_fill(16384, 1, 5.0, 842600.0, &tfill) == ADSIM_OK);
    CHECK(tfill == doctest::Approx(0.019444).epsilon(1e-4));

    double lo = 0.0, hi = 0.0, mean = 0.0, max_rate = 0.0;
    REQUIRE(adsim_estimate_bounds(cpu, 16384, 1, 5.0, 842600.0, &lo, &hi) == ADSIM_OK);
    CHECK(hi == doctest::Approx(0.03884).epsilon(1e-3));
    REQUIRE(adsim_estimate_mean_detection(cpu, 16384, 1, 5.0, 842600.0, &mean) ==
            ADSIM_OK);
    CHECK(mean == doctest::Approx(0.02912).epsilon(1e-3));
    REQUIRE(adsim_estimate_max_rate(cpu, 16384, 1, &max_rate) == ADSIM_OK);
    CHECK(std::abs(max_rate - 842600.0) / 842600.0 < 0.005);

    CHECK(adsim_estimate_t_ev(cpu, 99999999, &t_ev) != ADSIM_OK);
    CHECK(adsim_estimate_t_bf(0, 100.0, &tbf) == ADSIM_ERR_INVALID_ARGUMENT);
    adsim_profile_free(cpu);
}

TEST_CASE("custom profiles accumulate anchors") {
    adsim_profile* p = nullptr;
    REQUIRE(adsim_profile_create("bench", 1 << 20, &p) == ADSIM_OK);
    double v = 0.0;
    CHECK(adsim_estimate_t_ev(p, 64, &v) != ADSIM_OK); // no anchors yet
    REQUIRE(adsim_profile_add_anchor(p, 1024, 0.01) == ADSIM_OK);
    REQUIRE(adsim_profile_add_anchor(p, 4096, 0.02) == ADSIM_OK);
    REQUIRE(adsim_estimate_t_ev(p, 4096, &v) == ADSIM_OK);
    CHECK(v == doctest::Approx(0.02));
    CHECK(adsim_profile_add_anchor(p, 1024, 0.5) != ADSIM_OK); // duplicate
    adsim_profile_free(p);
}

TEST_CASE("config load, validation diagnostics and builtin text") {
    adsim_config* c = nullptr;
    CHECK(adsim_config_load_string("{ not json", &c) == ADSIM_ERR_PARSE);
    CHECK(adsim_config_load_string("{}", &c) == ADSIM_ERR_PARSE);
    CHECK(adsim_config_builtin("nope", &c) == ADSIM_ERR_PARSE);

    char* text = nullptr;
    REQUIRE(adsim_config_builtin_text("sigmoid-default", &text) == ADSIM_OK);
    REQUIRE(text != nullptr);
    REQUIRE(adsim_config_load_string(text, &c) == ADSIM_OK);
    adsim_string_free(text);
    adsim_config_free(c);
}

TEST_CASE("a short run produces the three output documents") {
    adsim_config* c = nullptr;
    REQUIRE(adsim_config_builtin("sigmoid-default", &c) == ADSIM_OK);
    adsim_sim* sim = nullptr;
    REQUIRE(adsim_sim_create(c, 9, &sim) == ADSIM_OK);
    REQUIRE(adsim_sim_run(sim, 0.5) == ADSIM_OK);

    char* csv = nullptr;
    REQUIRE(adsim_sim_metrics_csv(sim, &csv) == ADSIM_OK);
    CHECK(std::string(csv).rfind("time,", 0) == 0);
    adsim_string_free(csv);

    char* summary = nullptr;
    REQUIRE(adsim_sim_summary_json(sim, &summary) == ADSIM_OK);
    CHECK(std::string(summary).find("\"seed\": 9") != std::string::npos);
    adsim_string_free(summary);

    std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "adsim-capi-test";
    std::filesystem::remove_all(dir);
    REQUIRE(adsim_sim_write_outputs(sim, dir.c_str()) == ADSIM_OK);
    CHECK(std::filesystem::exists(dir / "metrics.csv"));
    CHECK(std::filesystem::exists(dir / "workflow.log"));
    CHECK(std::filesystem::exists(dir / "summary.json"));
    std::filesystem::remove_all(dir);

    adsim_sim_free(sim);
    adsim_config_free(c);
}
