#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include "ehrelay.h"

namespace {

struct StringOut {
    char* s = nullptr;
    ~StringOut() { ehr_string_free(s); }
};

}  // namespace

TEST_CASE("version and defaults") {
    CHECK(ehr_version() != nullptr);
    CHECK(std::strlen(ehr_version()) > 0);

    ehr_params p;
    ehr_params_default(&p);
    CHECK(p.pathloss_exponent == 3.0);
    CHECK(p.bandwidth_hz == 125e3);
    CHECK(p.pb_power_w == 1.0);
    CHECK(p.frame_s == 0.1);

    ehr_options o;
    ehr_options_default(&o);
    CHECK(o.ib_eps1 == 1e-6);
    CHECK(o.ib_eps2 == 1e-7);
    CHECK(o.pt_budget_threshold == 0.01);
    CHECK(o.max_epochs == 2000);
    CHECK(o.seed == 1);
}

TEST_CASE("instance lifecycle through the C surface") {
    ehr_params p;
    ehr_params_default(&p);
    ehr_instance* inst = nullptr;
    REQUIRE(ehr_instance_generate(7, 4, 2, &p, &inst) == EHR_OK);
    REQUIRE(inst != nullptr);
    CHECK(ehr_instance_devices(inst) == 4);
    CHECK(ehr_instance_beacons(inst) == 2);
    CHECK(ehr_instance_seed(inst) == 7);

    double e = -1.0;
    CHECK(ehr_instance_energy(inst, 0, &e) == EHR_OK);
    CHECK(e >= 0.0);
    CHECK(ehr_instance_energy(inst, 99, &e) == EHR_ERR_INVALID_ARG);
    CHECK(std::strlen(ehr_last_error()) > 0);

    StringOut text;
    REQUIRE(ehr_instance_to_string(inst, &text.s) == EHR_OK);
    CHECK(std::string(text.s).rfind("ehrelay-instance v1", 0) == 0);

    const char* path = "capi_instance.txt";
    REQUIRE(ehr_instance_save(inst, path) == EHR_OK);
    ehr_instance* back = nullptr;
    REQUIRE(ehr_instance_load(path, &back) == EHR_OK);
    StringOut text2;
    REQUIRE(ehr_instance_to_string(back, &text2.s) == EHR_OK);
    CHECK(std::string(text.s) == text2.s);  // bit-exact round trip
    ehr_instance_free(back);
    ehr_instance_free(inst);
    std::remove(path);

    ehr_instance* missing = nullptr;
    CHECK(ehr_instance_load("no_such_instance_file.txt", &missing) == EHR_ERR_IO);
    CHECK(missing == nullptr);

    // bad shapes are invalid args
    ehr_instance* bad = nullptr;
    CHECK(ehr_instance_generate(1, 0, 2, &p, &bad) == EHR_ERR_INVALID_ARG);
    CHECK(ehr_instance_devices(nullptr) < 0);

    // null params means defaults
    ehr_instance* implicit = nullptr;
    ehr_instance* explicit_defaults = nullptr;
    REQUIRE(ehr_instance_generate(7, 4, 2, nullptr, &implicit) == EHR_OK);
    REQUIRE(ehr_instance_generate(7, 4, 2, &p, &explicit_defaults) == EHR_OK);
    StringOut ta;
    StringOut tb;
    REQUIRE(ehr_instance_to_string(implicit, &ta.s) == EHR_OK);
    REQUIRE(ehr_instance_to_string(explicit_defaults, &tb.s) == EHR_OK);
    CHECK(std::string(ta.s) == tb.s);
    ehr_instance_free(implicit);
    ehr_instance_free(explicit_defaults);
}

TEST_CASE("solving through the C surface") {
    ehr_params p;
    ehr_params_default(&p);
    ehr_options o;
    ehr_options_default(&o);
    ehr_instance* inst = nullptr;
    REQUIRE(ehr_instance_generate(11, 4, 2, &p, &inst) == EHR_OK);

    for (const char* scheme : {"direct", "mst", "greedy", "opt"}) {
        ehr_solution* sol = nullptr;
        REQUIRE(ehr_solve(inst, scheme, &o, &sol) == EHR_OK);
        CHECK(ehr_solution_valid(sol) == 1);
        CHECK(ehr_solution_epochs(sol) == 0);
        CHECK(ehr_solution_min_bits(sol) > 0.0);
        CHECK(ehr_solution_max_bits(sol) >= ehr_solution_min_bits(sol));
        double total = 0.0;
        for (int i = 0; i < 4; ++i) {
            const int parent = ehr_solution_parent(sol, i);
            CHECK(parent >= 0);
            CHECK(parent <= 4);
            total += ehr_solution_slot(sol, i);
        }
        CHECK(total == doctest::Approx(p.frame_s).epsilon(1e-9));
        CHECK(ehr_solution_parent(sol, 17) < 0);
        CHECK(std::isnan(ehr_solution_slot(sol, 17)));
        ehr_solution_free(sol);
    }

    // determinism through the boundary: same options, same answer
    ehr_options o2 = o;
    o2.max_epochs = 25;
    ehr_solution* s1 = nullptr;
    ehr_solution* s2 = nullptr;
    REQUIRE(ehr_solve(inst, "proposed", &o2, &s1) == EHR_OK);
    REQUIRE(ehr_solve(inst, "proposed", &o2, &s2) == EHR_OK);
    CHECK(ehr_solution_epochs(s1) > 0);
    CHECK(ehr_solution_min_bits(s1) == ehr_solution_min_bits(s2));
    for (int i = 0; i < 4; ++i)
        CHECK(ehr_solution_parent(s1, i) == ehr_solution_parent(s2, i));

    // solution file and dot text
    const char* spath = "capi_solution.txt";
    REQUIRE(ehr_solution_save(s1, spath) == EHR_OK);
    std::FILE* f = std::fopen(spath, "rb");
    REQUIRE(f != nullptr);
    char head[32] = {0};
    REQUIRE(std::fread(head, 1, 20, f) == 20);
    std::fclose(f);
    CHECK(std::string(head).rfind("ehrelay-solution v1", 0) == 0);
    std::remove(spath);

    StringOut dot;
    REQUIRE(ehr_solution_dot(inst, s1, &dot.s) == EHR_OK);
    CHECK(std::string(dot.s).rfind("digraph", 0) == 0);

    ehr_solution_free(s1);
    ehr_solution_free(s2);

    ehr_solution* bad = nullptr;
    CHECK(ehr_solve(inst, "warp", &o, &bad) == EHR_ERR_INVALID_ARG);
    CHECK(bad == nullptr);
    CHECK(ehr_solve(nullptr, "direct", &o, &bad) == EHR_ERR_INVALID_ARG);

    // force the balancer cap with a zero iteration budget; it surfaces as
    // NO_CONVERGE unless the star happened to start out balanced
    ehr_options tight = o;
    tight.ib_max_outer = 0;
    ehr_solution* capped = nullptr;
    const ehr_status cap_status = ehr_solve(inst, "direct", &tight, &capped);
    // either the balancer finished in zero outer iterations or it reports the cap
    if (cap_status != EHR_OK) {
        CHECK(cap_status == EHR_ERR_NO_CONVERGE);
        CHECK(capped == nullptr);
    } else {
        ehr_solution_free(capped);
    }

    ehr_instance_free(inst);
}

TEST_CASE("training through the C surface") {
    ehr_params p;
    ehr_params_default(&p);
    ehr_options o;
    ehr_options_default(&o);
    o.max_epochs = 20;
    o.seed = 9;

    ehr_instance* inst = nullptr;
    REQUIRE(ehr_instance_generate(3, 3, 2, &p, &inst) == EHR_OK);

    ehr_training* tr = nullptr;
    REQUIRE(ehr_train(inst, &o, &tr) == EHR_OK);
    const int epochs = ehr_training_epochs(tr);
    CHECK(epochs == 20);
    CHECK(ehr_training_stop_epoch(tr) == 19);

    double loss = 0.0, run_min = 0.0, b_min = 0.0;
    double prev_min = 1e300;
    for (int e = 0; e < epochs; ++e) {
        REQUIRE(ehr_training_curve(tr, e, &loss, &run_min, &b_min) == EHR_OK);
        CHECK(run_min <= prev_min + 1e-18);
        CHECK(run_min <= loss);
        prev_min = run_min;
    }
    CHECK(ehr_training_curve(tr, epochs, &loss, &run_min, &b_min) == EHR_ERR_INVALID_ARG);

    StringOut csv;
    REQUIRE(ehr_training_curves_csv(tr, &csv.s) == EHR_OK);
    CHECK(std::string(csv.s).rfind("epoch,loss,running_min_loss,b_min\n", 0) == 0);

    const char* ckpath = "capi_checkpoint.txt";
    REQUIRE(ehr_training_save_checkpoint(tr, ckpath) == EHR_OK);
    std::FILE* f = std::fopen(ckpath, "rb");
    REQUIRE(f != nullptr);
    char head[32] = {0};
    REQUIRE(std::fread(head, 1, 22, f) == 22);
    std::fclose(f);
    CHECK(std::string(head).rfind("ehrelay-checkpoint v1", 0) == 0);
    std::remove(ckpath);

    ehr_solution* sol = nullptr;
    REQUIRE(ehr_training_solution(tr, inst, &o, &sol) == EHR_OK);
    CHECK(ehr_solution_valid(sol) == 1);
    ehr_solution_free(sol);

    ehr_training_free(tr);
    ehr_instance_free(inst);
}

TEST_CASE("benchmark sweep through the C surface") {
    const char* cfg =
        "schemes = direct, mst\n"
        "n_devices = 2, 3\n"
        "n_beacons = 1\n"
        "seeds_per_cell = 2\n"
        "base_seed = 4\n";

    StringOut csv;
    REQUIRE(ehr_bench_run(cfg, 1, &csv.s) == EHR_OK);
    const std::string text(csv.s);
    CHECK(text.rfind("scheme,n_devices,n_beacons,pb_power_w,seed,", 0) == 0);
    int lines = 0;
    for (const char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == 1 + 2 * 2 * 2);  // header + cells * seeds * schemes

    const char* path = "capi_bench.csv";
    REQUIRE(ehr_bench_run_to_file(cfg, 1, path) == EHR_OK);
    std::FILE* f = std::fopen(path, "rb");
    REQUIRE(f != nullptr);
    std::fclose(f);
    std::remove(path);

    StringOut none;
    CHECK(ehr_bench_run("nonsense = 1\n", 1, &none.s) == EHR_ERR_INVALID_ARG);
    CHECK(none.s == nullptr);
    CHECK(std::strlen(ehr_last_error()) > 0);
}
