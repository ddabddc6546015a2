#include "sit/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string output;
};

class Workdir {
public:
    Workdir() : dir_(fs::temp_directory_path() / ("sit_cli_test_" + std::to_string(::getpid())))
    {
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Workdir() { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    Run run(const std::string& args) const
    {
        const std::string log = path("last.log");
        const std::string cmd = std::string(SIT_CLI_PATH) + " " + args + " > " + log + " 2>&1";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, sit::read_file(log)};
    }

private:
    fs::path dir_;
};

std::size_t count_files(const std::string& dir)
{
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir))
        ++n;
    return n;
}

} // namespace

TEST_CASE("sample: analytic Heun run writes the documented header")
{
    Workdir w;
    const auto r = w.run("sample --analytic two-gauss-1d --sampler heun --steps 250 --n 100 --seed 9 --out " + w.path("s.txt"));
    REQUIRE(r.code == 0);
    const std::string text = sit::read_file(w.path("s.txt"));
    CHECK(text.rfind("# d=1 n=100 seed=9 nfe=500\n", 0) == 0);
    const auto file = sit::load_samples(w.path("s.txt"));
    CHECK(file.x.rows() == 100);
}

TEST_CASE("sample: kl-eta without a profile is a config error")
{
    Workdir w;
    const auto r = w.run("sample --analytic two-gauss-1d --sampler em --w kl-eta:0.05 --out " + w.path("s.txt"));
    CHECK(r.code == 2);
    CHECK(r.output.find("L_t") != std::string::npos);
    CHECK(!fs::exists(w.path("s.txt")));
}

TEST_CASE("sample: guidance doubles the recorded NFE")
{
    Workdir w;
    const auto r = w.run("sample --analytic grid-9 --sampler em --steps 250 --zeta 2 --class 4 --n 10 --out " + w.path("g.txt"));
    REQUIRE(r.code == 0);
    CHECK(sit::load_samples(w.path("g.txt")).nfe == 2 * (250 + 1));
    CHECK(sit::load_samples(w.path("g.txt")).labels == std::vector<int>(10, 4));
}

TEST_CASE("sample: usage and numerical failures map to exit codes")
{
    Workdir w;
    CHECK(w.run("sample --analytic nowhere --out " + w.path("x.txt")).code == 2);
    CHECK(w.run("sample --bogus-flag").code == 2);
    CHECK(w.run("").code == 2);
    CHECK(w.run("sample --checkpoint " + w.path("missing.ckpt") + " --out " + w.path("x.txt")).code == 2);
    // w^KL is singular at alpha = 0, which the Linear EM window touches.
    const auto r = w.run("sample --analytic two-gauss-1d --sampler em --w kl --out " + w.path("x.txt"));
    CHECK(r.code == 3);
}

TEST_CASE("train: three files, reproducible, clear errors")
{
    Workdir w;
    const std::string args = "train --preset two-gauss-1d --train-steps 50 --batch 32 --seed 4 --out ";
    REQUIRE(w.run(args + w.path("m.ckpt")).code == 0);
    CHECK(count_files(w.path("")) == 4); // + the command log
    CHECK(fs::exists(w.path("m.ckpt.profile")));
    CHECK(fs::exists(w.path("m.ckpt.curve")));
    REQUIRE(w.run(args + w.path("m2.ckpt")).code == 0);
    CHECK(sit::read_file(w.path("m.ckpt")) == sit::read_file(w.path("m2.ckpt")));
    CHECK(sit::read_file(w.path("m.ckpt.profile")) == sit::read_file(w.path("m2.ckpt.profile")));

    const auto missing = w.run("train --data " + w.path("nope.txt") + " --out " + w.path("z.ckpt"));
    CHECK(missing.code == 2);
    CHECK(missing.output.find(w.path("nope.txt")) != std::string::npos);

    const auto blowup = w.run("train --preset two-gauss-1d --train-steps 100 --batch 16 --lr 1e150 --out " + w.path("b.ckpt"));
    CHECK(blowup.code == 3);
    CHECK(blowup.output.find("step") != std::string::npos);

    // The checkpoint drives sampling.
    REQUIRE(w.run("sample --checkpoint " + w.path("m.ckpt") + " --sampler em --steps 20 --n 10 --out " + w.path("s.txt")).code == 0);
}

TEST_CASE("eval: reports, errors and determinism")
{
    Workdir w;
    REQUIRE(w.run("sample --analytic ring-8 --sampler heun --steps 20 --n 300 --out " + w.path("s.txt")).code == 0);
    const std::string base = "eval --preset ring-8 --samples " + w.path("s.txt") + " --reference-n 300 ";
    REQUIRE(w.run(base + "--out " + w.path("r1.txt") + " --json " + w.path("r1.json")).code == 0);
    REQUIRE(w.run(base + "--out " + w.path("r2.txt")).code == 0);
    CHECK(sit::read_file(w.path("r1.txt")) == sit::read_file(w.path("r2.txt")));
    const std::string report = sit::read_file(w.path("r1.txt"));
    CHECK(report.find("energy_distance ") != std::string::npos);
    CHECK(report.find("occupancy_7 ") != std::string::npos);
    CHECK(report.find("not FID") != std::string::npos);
    CHECK(sit::read_file(w.path("r1.json")).find("\"energy_distance\"") != std::string::npos);

    CHECK(w.run("eval --preset ring-8 --samples " + w.path("none.txt")).code == 2);
    CHECK(w.run("eval --preset two-gauss-1d --samples " + w.path("s.txt") + " --out " + w.path("r3.txt")).code == 2);
}

TEST_CASE("sweep: cells, curves, failures and resumption")
{
    Workdir w;
    const std::string cfg = w.path("sweep.json");
    {
        std::string text = R"({"dataset": {"preset": "two-gauss-1d"},
            "sweep": {"schedules": ["linear", "gvp"], "samplers": ["heun", "em"],
                      "diffusions": ["sigma"], "nfe": [16], "n": 200},
            "eval": {"reference_n": 200}})";
        sit::write_file_atomic(cfg, text);
    }
    const auto r = w.run("sweep --config " + cfg + " --out " + w.path("out"));
    REQUIRE(r.code == 0);
    CHECK(r.output.find("4 cells, 0 failed") != std::string::npos);
    CHECK(count_files(w.path("out/cells")) == 4);
    CHECK(fs::exists(w.path("out/config.json")));
    const std::string table = sit::read_file(w.path("out/sweep.tsv"));

    // Re-running reuses every cell and rewrites identical outputs.
    const auto again = w.run("sweep --config " + cfg + " --out " + w.path("out"));
    CHECK(again.output.find("4 reused") != std::string::npos);
    CHECK(sit::read_file(w.path("out/sweep.tsv")) == table);

    sit::write_file_atomic(cfg, R"({"sweep": {"samplers": ["heun", "em"], "diffusions": ["kl", "sigma"],
                                              "nfe": [16, 32, 64], "n": 100}, "eval": {"reference_n": 100}})");
    const auto mixed = w.run("sweep --config " + cfg + " --out " + w.path("nfe"));
    REQUIRE(mixed.code == 0);
    CHECK(mixed.output.find("9 cells, 3 failed") != std::string::npos);
    CHECK(fs::exists(w.path("nfe/curve_linear_velocity_heun.txt")));
    CHECK(fs::exists(w.path("nfe/curve_linear_velocity_em_sigma.txt")));
    CHECK(sit::read_file(w.path("nfe/cells/linear_velocity_em_kl_nfe16.txt")).find("status error") != std::string::npos);
    CHECK(sit::read_file(w.path("nfe/cells/linear_velocity_em_sigma_nfe16.txt")).find("status ok") != std::string::npos);
}

TEST_CASE("info prints a schedule table")
{
    Workdir w;
    const auto r = w.run("info --schedule sbdm-vp --w kl --points 3");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("singular") != std::string::npos);
    CHECK(r.output.find("0.5 ") != std::string::npos);
}
