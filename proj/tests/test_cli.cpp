#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hypoheat/config.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
};

CliRun run(const std::string& args) {
    static int calls = 0;
    const fs::path log = fs::temp_directory_path() /
                         ("hypoheat_cli_" + std::to_string(::getpid()) + "_" + std::to_string(calls++) + ".txt");
    const std::string cmd = std::string(HYPOHEAT_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    fs::remove(log);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

fs::path workdir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hypoheat_cli_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmall = R"(group = euclidean1
half_width = 1.5
points = 320
u0 = bump:1:0.5
epsilons = 0.5, 0.25, 0.125, 0.0625, 0.03125
T = 0.25
dt = 0.00390625
)";

} // namespace

TEST(Cli, SweepPassWritesReportAndManifest) {
    const fs::path d = workdir("pass");
    const fs::path cfg = write(d, "a.cfg", std::string(kSmall) + "potential = delta\n");
    const CliRun r = run("sweep --experiment existence --config " + cfg.string() + " --out " + (d / "out").string());
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("VERDICT: Moderate(N="), std::string::npos);
    const std::string csv = slurp(d / "out" / "report.csv");
    EXPECT_EQ(csv.rfind("epsilon,omega,norm_sup_t,fitted_flag\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
    const std::string manifest = slurp(d / "out" / "manifest.txt");
    EXPECT_NE(manifest.find("config_sha256: "), std::string::npos);
    EXPECT_NE(manifest.find("VERDICT: Moderate("), std::string::npos);

    const CliRun f = run("fit --in " + (d / "out" / "report.csv").string());
    EXPECT_EQ(f.code, 0) << f.out;
    EXPECT_EQ(f.out.rfind("N=", 0), 0u);
    EXPECT_NE(f.out.find("points=5"), std::string::npos);
    EXPECT_EQ(run("fit --in " + (d / "out" / "report.csv").string() + " --col nope").code, 2);
    fs::remove_all(d);
}

TEST(Cli, NegativeControlExitsWithFailVerdict) {
    const fs::path d = workdir("fail");
    const fs::path cfg = write(d, "u.cfg", std::string(kSmall) + "potential = delta\nperturbation = omega:1\n");
    const CliRun r = run("sweep --experiment uniqueness --config " + cfg.string() + " --out " + (d / "out").string());
    EXPECT_EQ(r.code, 1) << r.out;
    EXPECT_NE(r.out.find("VERDICT: Fail("), std::string::npos);
    EXPECT_TRUE(fs::exists(d / "out" / "report.csv"));
    fs::remove_all(d);
}

TEST(Cli, UsageAndConfigErrorsExitTwo) {
    const fs::path d = workdir("usage");
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("sweep --experiment sideways --config x --out y").code, 2);
    EXPECT_EQ(run("solve --config /nonexistent.cfg --out " + d.string()).code, 2);
    const fs::path bad = write(d, "bad.cfg", "colour = blue\n");
    const CliRun r = run("sweep --experiment existence --config " + bad.string() + " --out " + (d / "o").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("colour"), std::string::npos);
    const fs::path nodelta = write(d, "s.cfg", "potential = delta\n");
    EXPECT_EQ(run("solve --config " + nodelta.string() + " --out " + (d / "o").string()).code, 2);
    EXPECT_EQ(run("--help").code, 0);
    fs::remove_all(d);
}

TEST(Cli, NumericalErrorExitsThree) {
    const fs::path d = workdir("num");
    const fs::path cfg = write(d, "s.cfg", "points = 32\npotential = constant:-200\nT = 1\ndt = 0.01\n");
    const CliRun r = run("solve --config " + cfg.string() + " --out " + (d / "o").string());
    EXPECT_EQ(r.code, 3) << r.out;
    EXPECT_NE(r.out.find("need dt <"), std::string::npos);
    fs::remove_all(d);
}

TEST(Cli, SolveWritesTrajectoryCsv) {
    const fs::path d = workdir("solve");
    const fs::path cfg =
        write(d, "s.cfg", "points = 64\npotential = delta\nepsilon = 0.25\nu0 = bump:1:0.5\nT = 0.25\ndt = 0.0625\n");
    const CliRun r = run("solve --config " + cfg.string() + " --out " + (d / "o").string());
    EXPECT_EQ(r.code, 0) << r.out;
    std::istringstream csv(slurp(d / "o" / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "t,l2,sobolev_nu2,h_nu2,energy");
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
        EXPECT_NE(line.back(), ',');
        EXPECT_EQ(line.find('\r'), std::string::npos);
    }
    EXPECT_EQ(rows, 5);

    // real V leaves the energy column blank
    const fs::path real = write(d, "r.cfg", "points = 64\npotential = constant:-1\nT = 0.25\ndt = 0.0625\n");
    ASSERT_EQ(run("solve --config " + real.string() + " --out " + (d / "r").string()).code, 0);
    std::istringstream rcsv(slurp(d / "r" / "trajectory.csv"));
    std::getline(rcsv, line);
    std::getline(rcsv, line);
    EXPECT_EQ(line.back(), ',');
    fs::remove_all(d);
}

TEST(Cli, ShippedConfigsParse) {
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(HYPOHEAT_CONFIG_DIR)) {
        if (entry.path().extension() != ".cfg") {
            continue;
        }
        ++seen;
        const hypoheat::SweepConfig cfg = hypoheat::load_config(entry.path());
        const auto grid = cfg.make_grid();
        EXPECT_NO_THROW(hypoheat::potential_spec(cfg, grid)) << entry.path();
        EXPECT_NO_THROW(hypoheat::initial_spec(cfg, grid)) << entry.path();
        EXPECT_GE(cfg.epsilons.size(), 4u) << entry.path();
    }
    EXPECT_GE(seen, 3);
}
