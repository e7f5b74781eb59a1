#include "catch_amalgamated.hpp"

#include "dynrec/step_function.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

using dynrec::StepFunction;

TEST_CASE("step function evaluates right-continuously", "[step]") {
  const StepFunction f({0.5, 0.7}, {1.0 / 3.0, 0.5}, 0.0);
  CHECK(f(0.0) == 0.0);
  CHECK(f(0.4999) == 0.0);
  CHECK(f(0.5) == 1.0 / 3.0);
  CHECK(f(0.7) == 1.0 / 3.0 + 0.5);
  CHECK(f(10.0) == 1.0 / 3.0 + 0.5);
  CHECK(f.left_limit(0.5) == 0.0);
  CHECK(f.left_limit(0.7) == 1.0 / 3.0);
  CHECK(f.jump_at(0.7) == 0.5);
  CHECK(f.jump_at(0.6) == 0.0);
}

TEST_CASE("initial value shifts every evaluation", "[step]") {
  const StepFunction f({1.0}, {-0.25}, 1.0);
  CHECK(f(0.0) == 1.0);
  CHECK(f(1.0) == 0.75);
  CHECK(f.initial_value() == 1.0);
}

TEST_CASE("empty step function is constant", "[step]") {
  const StepFunction f;
  CHECK(f.empty());
  CHECK(f(3.0) == 0.0);
  CHECK(f.left_limit(3.0) == 0.0);
}

TEST_CASE("from_jumps sorts and merges tied locations", "[step]") {
  const auto f = StepFunction::from_jumps({{0.7, 1.0}, {0.5, 1.0}, {0.7, 2.0}});
  REQUIRE(f.size() == 2);
  CHECK(f.locations()[0] == 0.5);
  CHECK(f.locations()[1] == 0.7);
  CHECK(f.jumps()[1] == 3.0);
  CHECK(f(0.7) == 4.0);
}

TEST_CASE("from_values keeps the given values", "[step]") {
  const auto f = StepFunction::from_values({0.1, 0.2}, {0.3, 0.1}, 1.0);
  CHECK(f(0.1) == 0.3);
  CHECK(f(0.2) == 0.1);
  CHECK(f.jump_at(0.2) == 0.1 - 0.3);
}

TEST_CASE("step function rejects bad input", "[step]") {
  CHECK_THROWS_AS(StepFunction({0.5, 0.5}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(StepFunction({0.7, 0.5}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(StepFunction({0.5}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(StepFunction({std::nan("")}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(StepFunction({0.5}, {std::numeric_limits<double>::infinity()}),
                  std::invalid_argument);
}
