#include <stdexcept>
#include <string>

#include "doctest.h"
#include "mfls/cli/commands.hpp"
#include "mfls/cli/config.hpp"
#include "mfls/util/error.hpp"

using namespace mfls;
using namespace mfls::cli;

TEST_CASE("config parsing applies sections and overrides") {
  const std::string text =
      "[run]\nbenchmark = storage\nseed = 3\n\n[train]\niterations = 12\nhidden = 8, 4\n\n[problem]\nx_max = 2\n";
  const auto cfg = parse_config(text);
  CHECK(cfg.benchmark == "storage");
  CHECK(cfg.seed == 3);
  CHECK(cfg.train.iterations == 12);
  CHECK(cfg.train.arch.hidden == std::vector<std::size_t>{8, 4});
  CHECK(cfg.problem.storage.x_max == 2.0);
  Overrides ov;
  ov.seed = 9;
  CHECK(parse_config(text, ov).seed == 9);
  CHECK(parse_config(text, ov).train.seed == 9);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("[run]\nbenchmark = storage\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nbenchmark = nope\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nbenchmark = mv-dual\n[train]\niterations = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("config hash ignores order and output location") {
  const auto a = parse_config("[run]\nbenchmark = mv-dual\nseed = 2\n[train]\niterations = 5\n");
  const auto b = parse_config("[train]\niterations = 5\n[run]\nseed = 2\nbenchmark = mv-dual\nout = elsewhere\n");
  CHECK(a.hash == b.hash);
  const auto c = parse_config("[run]\nbenchmark = mv-dual\nseed = 2\n[train]\niterations = 6\n");
  CHECK(a.hash != c.hash);
  CHECK(hash_hex(0x1fULL) == "000000000000001f");
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(DimensionError("x")) == 2);
  CHECK(exit_code_for(UndefinedValueError("x")) == 3);
  CHECK(exit_code_for(DivergenceError(5, "x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("inline comments are ignored") {
  const auto cfg = parse_config("; header\n[run]\nbenchmark = mv-dual   ; id\nseed = 4 # master seed\n[train]\nhidden = 8, 8\n");
  CHECK(cfg.benchmark == "mv-dual");
  CHECK(cfg.seed == 4);
  CHECK(cfg.train.arch.hidden == std::vector<std::size_t>{8, 8});
}
