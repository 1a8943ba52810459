#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <doctest.h>

#include "gridfc/checkpoint.hpp"
#include "gridfc/grnn.hpp"
#include "support.hpp"

using namespace gridfc;

namespace {

GrnnConfig small_config() {
  GrnnConfig cfg;
  cfg.buses = 5;
  cfg.in_features = 1;
  cfg.hidden = 3;
  cfg.out_features = 2;
  cfg.taps = 2;
  cfg.actions = 7;
  return cfg;
}

GrnnParameters random_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return GrnnParameters::random_init(small_config(), rng);
}

}  // namespace

TEST_CASE("parameter text round-trips bit-exactly") {
  const GrnnParameters original = random_params(99);
  const std::string text = serialize_parameters(original);
  const GrnnParameters restored = deserialize_parameters(text);

  CHECK(restored.config == original.config);
  REQUIRE(restored.parameter_count() == original.parameter_count());
  CHECK(restored.pack() == original.pack());  // element-wise, must be exact

  SUBCASE("serialization itself is stable") {
    CHECK(serialize_parameters(restored) == text);
  }
}

TEST_CASE("parameter text begins with the version line") {
  const std::string text = serialize_parameters(random_params(1));
  CHECK(text.rfind(std::string(kCheckpointVersion) + "\n", 0) == 0);
}

TEST_CASE("unknown version is rejected") {
  std::string text = serialize_parameters(random_params(2));
  const auto pos = text.find("v1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 2, "v9");
  CHECK_THROWS_AS((void)deserialize_parameters(text), CheckpointError);
}

TEST_CASE("damaged parameter text is rejected") {
  const std::string text = serialize_parameters(random_params(3));

  SUBCASE("empty input") {
    CHECK_THROWS_AS((void)deserialize_parameters(""), CheckpointError);
  }
  SUBCASE("truncated input") {
    CHECK_THROWS_AS((void)deserialize_parameters(text.substr(0, text.size() / 2)),
                    CheckpointError);
  }
  SUBCASE("trailing garbage") {
    CHECK_THROWS_AS((void)deserialize_parameters(text + "extra 1 2 3\n"),
                    CheckpointError);
  }
  SUBCASE("non-numeric entry") {
    std::string bad = text;
    const auto pos = bad.rfind("head_b");
    REQUIRE(pos != std::string::npos);
    const auto line_end = bad.find('\n', pos);
    bad.insert(line_end + 1, "oops ");
    CHECK_THROWS_AS((void)deserialize_parameters(bad), CheckpointError);
  }
  SUBCASE("nonsensical shape header") {
    std::string bad = text;
    const auto pos = bad.find("config ");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 8, "config 0");  // zero buses is invalid
    CHECK_THROWS_AS((void)deserialize_parameters(bad), CheckpointError);
  }
}

TEST_CASE("parameters survive a save/load cycle on disk") {
  const GrnnParameters original = random_params(17);
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "gridfc_checkpoint_test.params";
  save_parameters(original, path.string());
  const GrnnParameters loaded = load_parameters(path.string());
  CHECK(loaded.config == original.config);
  CHECK(loaded.pack() == original.pack());
  std::filesystem::remove(path);
}

TEST_CASE("loading a missing file reports an error") {
  CHECK_THROWS_AS((void)load_parameters("/nonexistent/dir/params.txt"),
                  CheckpointError);
}
