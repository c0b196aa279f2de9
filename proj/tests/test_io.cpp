#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "ardiff/config.hpp"
#include "ardiff/tensor_io.hpp"

using namespace ardiff;

TEST_SUITE("cli") {

TEST_CASE("tensor roundtrip") {
    LatentVideo v(2, 3, 2);
    for (std::size_t i = 0; i < v.data().size(); ++i) v.data()[i] = 0.25 * static_cast<double>(i) - 1.0;
    std::stringstream ss;
    write_latent(ss, v, 0.5);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 12) == "ARDIFFTENSOR");
    CHECK(bytes.find("\"dtype\":\"float32\"") != std::string::npos);
    CHECK(bytes.find("\"shape\":[2,3,2]") != std::string::npos);
    double scale = 0.0;
    CHECK(read_latent(ss, &scale) == v);
    CHECK(scale == 0.5);

    std::stringstream bad("ARDIFFTENSOX");
    CHECK_THROWS(read_latent(bad));

    std::ostringstream csv;
    write_latent_csv(csv, v);
    CHECK(csv.str().rfind("frame,token,dim,value\n0,0,0,-1\n", 0) == 0);
}

TEST_CASE("dataset file roundtrip") {
    const auto path = std::filesystem::temp_directory_path() / "ardiff_test_dataset.ardt";
    std::vector<LatentVideo> videos{LatentVideo(2, 1, 2, {1, 2, 3, 4}), LatentVideo(2, 1, 2, {5, 6, 7, 8})};
    write_dataset(path.string(), videos, 1.0);
    CHECK(read_dataset(path.string()) == videos);
    std::filesystem::remove(path);
}

TEST_CASE("config defaults and overrides") {
    const RunConfig d = parse_config("{}");
    CHECK(d.denoiser.timesteps == 100);
    CHECK(d.train.learning_rate == 2e-4);
    CHECK(d.sample.grid_steps == 50);

    const RunConfig c = parse_config(R"({
      "frames": 6,
      "scale_factor": 0.25,
      "schedule": {"timesteps": 40},
      "train": {"steps": 10, "seed": 3},
      "sample": {"grid_steps": 40, "s": 4, "mode": "posterior"}
    })");
    CHECK(c.denoiser.frames == 6);
    CHECK(c.dataset.frames == 6);
    CHECK(c.sample.frames == 6);
    CHECK(c.denoiser.timesteps == 40);
    CHECK(c.train.scale_factor == 0.25);
    CHECK(c.sample.scale_factor == 0.25);
    CHECK(c.sample.mode == SampleMode::Posterior);
    CHECK(parse_config(dump_config(c)).train.seed == 3);
}

TEST_CASE("config errors name the field or line") {
    auto message = [](const std::string& text) {
        try {
            (void)parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message(R"({"train": {"stepz": 3}})").find("train.stepz") != std::string::npos);
    CHECK(message(R"({"train": {"steps": "many"}})").find("train.steps") != std::string::npos);
    CHECK(message("{\n  \"frames\": 3,\n  \"dim\": ,\n}").find("line 3") != std::string::npos);
    CHECK(message(R"({"sample": {"grid_steps": 500}})").find("grid_steps") != std::string::npos);
    CHECK(message(R"({"sample": {"mode": "posterior"}})").find("posterior") != std::string::npos);
    CHECK(message(R"({"sample": {"mode": "fast"}})").find("sample.mode") != std::string::npos);
    CHECK(message(R"({"denoiser": {"n_heads": 5}})") != "no error");
}

}
