#include <gtest/gtest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "pfode/workflow.hpp"
#include "support.hpp"

using namespace pfode;
using testing_support::scratch_dir;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig =
    "T = 100\n"
    "t_start = 40\n"
    "seed = 5\n"
    "image_nx = 32\nimage_ny = 32\nimage_nz = 32\n"
    "shell_thickness = 4\n"
    "anomaly_count_min = 2\nanomaly_count_max = 2\n"
    "blob_radius_min = 3\nblob_radius_max = 4\n"
    "n_healthy = 8\nn_anomalous = 4\n";

int run(const std::string& args) {
    const std::string cmd = std::string("PFODE_LOG=error ") + PFODE_CLI_PATH + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path small_config(const fs::path& dir) {
    io::atomic_write(dir / "small.cfg", std::string(kSmallConfig));
    return dir / "small.cfg";
}

} // namespace

TEST(Cli, PhantomGenIsByteIdenticalAcrossRuns) {
    const auto dir = scratch_dir("cli_phantom");
    const auto cfg = small_config(dir);
    ASSERT_EQ(run("phantom-gen --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run("phantom-gen --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "a" / "cohort")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir / "a");
        EXPECT_EQ(io::read_file(e.path()), io::read_file(dir / "b" / rel)) << rel;
        ++files;
    }
    EXPECT_GT(files, 12u * 4u);
}

TEST(Cli, ExitCodesFollowErrorCategory) {
    const auto dir = scratch_dir("cli_errors");
    EXPECT_EQ(run("phantom-gen --set bogus=1 --out " + dir.string()), 2);
    EXPECT_EQ(run("phantom-gen --set t_start=0 --out " + dir.string()), 2);
    EXPECT_EQ(run("no-such-command"), 2);
    EXPECT_EQ(run("render --out " + dir.string()), 2);
    EXPECT_EQ(run("reconstruct --out " + (dir / "empty").string()), 3);
    EXPECT_EQ(run("render --input " + (dir / "missing.tauv").string() + " --out " + dir.string()), 3);
    io::atomic_write(dir / "bad.tauv", std::string("NOPE"));
    EXPECT_EQ(run("render --input " + (dir / "bad.tauv").string() + " --out " + dir.string()), 3);
}

TEST(Cli, HealthyReconstructionStaysWithinHealthyRange) {
    const auto dir = scratch_dir("cli_recon");
    const auto cfg = small_config(dir);
    const std::string common = " --config " + cfg.string() + " --out " + (dir / "work").string();
    ASSERT_EQ(run("phantom-gen" + common), 0);
    ASSERT_EQ(run("template" + common), 0);
    ASSERT_EQ(run("fit-denoiser" + common), 0);
    ASSERT_EQ(run("reconstruct --sampler d1 --jobs 2" + common), 0);
    ASSERT_EQ(run("anomaly" + common), 0);
    const auto rows = workflow::read_csv(dir / "work" / "anomaly" / "anomaly.csv", "id,group,map_mean");
    const auto split = workflow::read_csv(dir / "work" / "cohort" / "subjects.csv", "id,group,split,magnitude,burden");
    ASSERT_EQ(rows.size(), 12u);
    std::vector<double> healthy_train;
    std::vector<double> healthy_test;
    double anomalous_min = 1e300;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double m = std::stod(rows[i][2]);
        if (rows[i][1] == "anomalous") anomalous_min = std::min(anomalous_min, m);
        else (split[i][2] == "train" ? healthy_train : healthy_test).push_back(m);
    }
    std::sort(healthy_train.begin(), healthy_train.end());
    const double p95 = sorted_percentile(healthy_train, 95.0);
    ASSERT_FALSE(healthy_test.empty());
    for (double m : healthy_test) {
        EXPECT_LT(m, p95);
        EXPECT_LT(m, anomalous_min);
    }
    ASSERT_EQ(run("render --input " + (dir / "work" / "anomaly" / "H0000.tauv").string() + common), 0);
    EXPECT_TRUE(fs::exists(dir / "work" / "render" / "H0000_z16.pgm"));
    EXPECT_TRUE(fs::exists(dir / "work" / "recon" / "resolved-config"));
}
