#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "phasescreen/oracles.hpp"
#include "phasescreen/snapshot.hpp"

namespace fs = std::filesystem;
using namespace phasescreen;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(PHASESCREEN_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("phasescreen_cli_" + name);
    fs::remove_all(p);
    return p;
}

const char* small_sweep =
    "--model ito --length 16 --points 64 --sigma 0.5 --Z 0.25 --dz-list 0.125,0.0625 --dz-ref 0.03125 --samples 4";

}  // namespace

TEST(Cli, SelftestPasses) {
    const fs::path out = scratch("selftest");
    EXPECT_EQ(run("selftest --output-dir " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "manifest.txt"));
}

TEST(Cli, PropagateFreeSpaceReportsOracleCheck) {
    const fs::path out = scratch("propagate");
    ASSERT_EQ(run("propagate --sigma 0 --steps 32 --snapshots 0,16,final --output-dir " + out.string()), 0);
    const std::string manifest = slurp(out / "manifest.txt");
    EXPECT_NE(manifest.find("# check free_space_max_abs"), std::string::npos) << manifest;
    EXPECT_EQ(manifest.find("FAIL"), std::string::npos) << manifest;
    const SnapshotFile s = read_snapshots((out / "snapshots.bspf").string());
    ASSERT_EQ(s.fields.size(), 3u);
    EXPECT_EQ(s.dz, 1.0 / 32.0);
    const ComplexField exact = free_space_field(s.grid, 1.0);
    double d = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) d = std::max(d, std::abs(s.fields[2][i] - exact[i]));
    EXPECT_LE(d, 1e-8);
    EXPECT_EQ(slurp(out / "propagate.csv").substr(0, 31), "n,z,l2_norm,center_re,center_im");
}

TEST(Cli, SweepCsvShapeAndReproducibility) {
    const fs::path a = scratch("sweep_a");
    const fs::path b = scratch("sweep_b");
    ASSERT_EQ(run(std::string("sweep-pathwise ") + small_sweep + " --output-dir " + a.string()), 0);
    ASSERT_EQ(run(std::string("sweep-pathwise ") + small_sweep + " --output-dir " + b.string()), 0);
    const std::string csv = slurp(a / "sweep_pathwise.csv");
    EXPECT_EQ(csv, slurp(b / "sweep_pathwise.csv"));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "dz,err,stderr,samples");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(line.substr(line.rfind(',') + 1), "4");
    }
    EXPECT_EQ(rows, 2);
}

TEST(Cli, SweepMomentsCsvHeader) {
    const fs::path out = scratch("moments");
    ASSERT_EQ(run(std::string("sweep-moments ") + small_sweep + " --output-dir " + out.string()), 0);
    const std::string csv = slurp(out / "sweep_moments.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "dz,kind,p,m,err,stderr,samples");
    EXPECT_NE(csv.find("fourier_mode"), std::string::npos);
    EXPECT_NE(csv.find("moment_sup"), std::string::npos);
}

TEST(Cli, ConfigFileAndOverride) {
    const fs::path out = scratch("cfg");
    fs::create_directories(out);
    {
        std::ofstream cfg(out / "run.cfg");
        cfg << "[grid]\nlength = 32\npoints = 256\n[medium]\nsigma = 0\n[splitting]\nsteps = 4\n";
    }
    ASSERT_EQ(run("propagate --config " + (out / "run.cfg").string() + " --steps 8 --output-dir " + out.string()), 0);
    const std::string manifest = slurp(out / "manifest.txt");
    EXPECT_NE(manifest.find("steps = 8"), std::string::npos);
    EXPECT_NE(manifest.find("length = 32"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    const fs::path out = scratch("errors");
    EXPECT_EQ(run("propagate --points 1000 --output-dir " + out.string()), 1);
    EXPECT_EQ(run("propagate --gamma 0.3 --ladder-refine 2 --output-dir " + out.string()), 1);
    EXPECT_EQ(run("propagate --no-such-flag 1"), 1);
    EXPECT_EQ(run("propagate --config /nonexistent.cfg"), 1);
    EXPECT_EQ(run("sweep-pathwise --dz-list 0.03125,0.01 --output-dir " + out.string()), 1);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_NE(run("no-such-command"), 0);
}
