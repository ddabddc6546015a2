#include "sit/config.hpp"
#include "sit/errors.hpp"
#include "sit/format.hpp"
#include "sit/io.hpp"
#include "sit/profile.hpp"
#include "sit/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace sit;

TEST_CASE("shortest round-trip formatting")
{
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.gaussian() * std::pow(10.0, rng.uniform(-30, 30));
        CHECK(parse_double(format_double(x)) == x);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(HUGE_VAL) == "inf");
    CHECK(std::isinf(parse_double("inf")));
    CHECK_THROWS_AS(parse_double("1.5x"), ConfigError);
    CHECK_THROWS_AS(parse_double(""), ConfigError);
    CHECK(parse_int("-42") == -42);
    CHECK_THROWS_AS(parse_int("4.2"), ConfigError);
}

TEST_CASE("sample files round trip")
{
    SampleFile f;
    f.x.resize(3, 2);
    f.x << 0.1, -2.5, 1e-300, 3.0, 7.25, -0.0;
    f.labels = {0, 2, 1};
    f.seed = 18446744073709551615ull;
    f.nfe = 502;
    std::stringstream ss;
    write_samples(ss, f);
    CHECK(ss.str().rfind("# d=2 n=3 seed=18446744073709551615 nfe=502 labels=1\n", 0) == 0);
    const SampleFile back = read_samples(ss);
    CHECK(back.x == f.x);
    CHECK(back.labels == f.labels);
    CHECK(back.seed == f.seed);
    CHECK(back.nfe == 502);

    std::istringstream short_file("# d=2 n=3 seed=0 nfe=0\n1 2\n");
    CHECK_THROWS_AS(read_samples(short_file), ConfigError);
    std::istringstream no_header("1 2\n");
    CHECK_THROWS_AS(read_samples(no_header), ConfigError);
}

TEST_CASE("loss profile: lookup, clamping and text round trip")
{
    const LossProfile p({0.0, 0.25, 0.5, 1.0}, {1.0, 2.0, 3.0});
    CHECK(p(0.1) == 1.0);
    CHECK(p(0.25) == 2.0);
    CHECK(p(0.99) == 3.0);
    CHECK(p(-1.0) == 1.0);
    CHECK(p(5.0) == 3.0);
    std::stringstream ss;
    p.write(ss);
    const LossProfile q = LossProfile::read(ss);
    CHECK(q.edges() == p.edges());
    CHECK(q.values() == p.values());
    CHECK_THROWS_AS(LossProfile({0.0, 1.0}, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(LossProfile({0.0, 0.0}, {1.0}), ConfigError);
    std::istringstream bad("# something else\n");
    CHECK_THROWS_AS(LossProfile::read(bad), ConfigError);
}

TEST_CASE("atomic writes replace whole files")
{
    const auto dir = std::filesystem::temp_directory_path() / "sit_io_test";
    std::filesystem::remove_all(dir);
    const std::string path = (dir / "nested" / "a.txt").string();
    write_file_atomic(path, "first\n");
    write_file_atomic(path, "second\n");
    CHECK(read_file(path) == "second\n");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "nested"))
        ++entries;
    CHECK(entries == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config round trips losslessly")
{
    ExperimentConfig c;
    c.seed = 1234567890123ull;
    c.schedule = "sbdm-vp:0.5:12";
    c.prediction = "score";
    c.objective = "score-weighted";
    c.train.learning_rate = 3.3e-4;
    c.train.t_lo = 0.001;
    c.train.hidden = {64, 32};
    c.sampler.kind = "em";
    c.sampler.diffusion = "kl-eta:0.05";
    c.sampler.zeta = 1.5;
    c.sampler.label = 3;
    c.sampler.t_end = 0.1 + 0.2;
    c.eval.metrics = {"energy", "kl-bound"};
    c.sweep.nfe = {8, 16};
    const ExperimentConfig back = config_from_json(to_json(c));
    CHECK(back == c);
    CHECK(to_json(back) == to_json(c));
    CHECK(config_from_json("{}") == ExperimentConfig{});
}

TEST_CASE("config validation")
{
    CHECK_THROWS_AS(config_from_json("{\"schedule\": \"cosine\"}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"sampler\": {\"kind\": \"rk4\"}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"bogus\": 1}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"train\": {\"steps\": \"many\"}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"dataset\": {}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"eval\": {\"metrics\": [\"fid\"]}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("not json"), ConfigError);
    const auto c = config_from_json("{\"dataset\": {\"file\": \"x.txt\"}}");
    CHECK(c.dataset_preset.empty());
    CHECK(c.dataset_file == "x.txt");
}

TEST_CASE("sampler spec resolves default windows")
{
    ExperimentConfig c;
    c.sampler.kind = "em";
    auto spec = c.sampler_spec(Schedule::linear(), Prediction::Score);
    CHECK(spec.t_start == 1 - 1e-3);
    CHECK(spec.t_end == 0.04);
    CHECK(spec.last_step_to == 0.0);
    c.sampler.no_last_step = true;
    CHECK(!c.sampler_spec(Schedule::linear(), Prediction::Score).last_step_to);
    c.sampler.kind = "heun";
    c.sampler.t_end = 0.01;
    spec = c.sampler_spec(Schedule::sbdm_vp(), Prediction::Velocity);
    CHECK(spec.t_end == 0.01);
    CHECK(!spec.last_step_to);
}
