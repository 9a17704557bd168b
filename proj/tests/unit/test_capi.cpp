#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "roughctl/roughctl.h"

namespace {

struct PathHandle {
    rc_path* p = nullptr;
    ~PathHandle() { rc_path_free(p); }
};

}  // namespace

TEST(CApi, VersionAndEmptyError) {
    EXPECT_STREQ(rc_version(), "1.0.0");
    EXPECT_NE(rc_last_error(), nullptr);
}

TEST(CApi, BrownianPathShapeAndIncrements) {
    PathHandle h;
    ASSERT_EQ(rc_path_sample_brownian(7, 2.0, 32, 2, 2, &h.p), RC_OK);
    EXPECT_EQ(rc_path_dim(h.p), 2u);
    EXPECT_EQ(rc_path_steps(h.p), 32u);
    EXPECT_DOUBLE_EQ(rc_path_time(h.p, 32), 2.0);
    double d1[2], a1[4], d2[2], a2[4], d[2], a[4];
    ASSERT_EQ(rc_path_increment(h.p, 0, 10, d1, a1), RC_OK);
    ASSERT_EQ(rc_path_increment(h.p, 10, 32, d2, a2), RC_OK);
    ASSERT_EQ(rc_path_increment(h.p, 0, 32, d, a), RC_OK);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(d[i], d1[i] + d2[i], 1e-13);
    // Chen: A_{0,32} = A_{0,10} + A_{10,32} + d1 (x) d2.
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(a[2 * i + j], a1[2 * i + j] + a2[2 * i + j] + d1[i] * d2[j], 1e-12);
    EXPECT_EQ(rc_path_increment(h.p, 10, 40, d, a), RC_INVALID_ARGUMENT);
    EXPECT_STRNE(rc_last_error(), "");
}

TEST(CApi, PointsValidationAndHoelderDistance) {
    const double times[] = {0.0, 0.5, 1.0};
    const double values[] = {0.0, 1.0, -1.0};
    PathHandle h, g;
    ASSERT_EQ(rc_path_from_points(times, 3, values, 1, &h.p), RC_OK);
    double area[1];
    double delta[1];
    ASSERT_EQ(rc_path_increment(h.p, 0, 2, delta, area), RC_OK);
    EXPECT_DOUBLE_EQ(delta[0], -1.0);
    EXPECT_NEAR(area[0], 0.5, 1e-15);  // geometric: A = delta^2 / 2 in one dimension
    const double bad_times[] = {0.0, 0.5, 0.5};
    EXPECT_EQ(rc_path_from_points(bad_times, 3, values, 1, &g.p), RC_INVALID_ARGUMENT);
    EXPECT_EQ(g.p, nullptr);
    double dist = -1.0;
    ASSERT_EQ(rc_path_hoelder_distance(h.p, h.p, 0.4, &dist), RC_OK);
    EXPECT_EQ(dist, 0.0);
    EXPECT_EQ(rc_path_from_points(nullptr, 3, values, 1, &g.p), RC_INVALID_ARGUMENT);
}

TEST(CApi, WriteReadRoundTrip) {
    PathHandle h, back;
    ASSERT_EQ(rc_path_sample_brownian(9, 1.0, 20, 1, 1, &h.p), RC_OK);
    ASSERT_EQ(rc_path_write(h.p, "capi_path.txt"), RC_OK);
    ASSERT_EQ(rc_path_read("capi_path.txt", &back.p), RC_OK);
    double dist = -1.0;
    ASSERT_EQ(rc_path_hoelder_distance(h.p, back.p, 0.4, &dist), RC_OK);
    EXPECT_EQ(dist, 0.0);
    EXPECT_EQ(rc_path_read("no/such/file.txt", &back.p), RC_IO);
}

TEST(CApi, RunsHarnessCommands) {
    rc_run* run = nullptr;
    ASSERT_EQ(rc_run_command("sample-path", R"({"out": "capi_run", "grid": 8})", &run), RC_OK);
    EXPECT_EQ(rc_run_exit_code(run), 0);
    EXPECT_NE(std::string(rc_run_record_json(run)).find("\"sample-path\""), std::string::npos);
    rc_run_free(run);

    run = nullptr;
    ASSERT_EQ(rc_run_command("bound", R"({"out": "capi_run", "n_paths": "lots"})", &run), RC_OK);
    EXPECT_EQ(rc_run_exit_code(run), 2);
    rc_run_free(run);
    EXPECT_EQ(rc_run_command(nullptr, "{}", &run), RC_INVALID_ARGUMENT);
}

TEST(CApi, NormalizesConfig) {
    char* out = nullptr;
    ASSERT_EQ(rc_config_normalize(R"({"grid": 64})", &out), RC_OK);
    const std::string text(out);
    rc_string_free(out);
    EXPECT_NE(text.find("\"grid\""), std::string::npos);
    EXPECT_NE(text.find("\"n_paths\""), std::string::npos);
    out = nullptr;
    EXPECT_EQ(rc_config_normalize(R"({"grid": 0})", &out), RC_CONFIG);
    EXPECT_EQ(out, nullptr);
}
