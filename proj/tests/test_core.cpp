#include <doctest.h>

#include <cmath>
#include <vector>

#include "coordtune/core.hpp"

using namespace coordtune;

TEST_CASE("subspace factories reject malformed domains") {
  CHECK_THROWS_AS(Subspace::continuous_box({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(Subspace::continuous_box({0.0, 1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Subspace::continuous_box({1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Subspace::binary_set(0), std::invalid_argument);
  CHECK_THROWS_AS(Subspace::binary_set(2, ResourceConstraint{{1.0}, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Subspace::binary_set(1, ResourceConstraint{{-1.0}, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Subspace::categorical_tuple({}), std::invalid_argument);
  CHECK_THROWS_AS(Subspace::categorical_tuple({3, 1}), std::invalid_argument);
}

TEST_CASE("encoding lengths") {
  CHECK(Subspace::continuous_box({0, 0, 0}, {1, 1, 1}).encoding_length() == 3);
  CHECK(Subspace::binary_set(7).encoding_length() == 7);
  CHECK(Subspace::categorical_tuple({4, 2, 3}).encoding_length() == 9);
}

TEST_CASE("configuration validation") {
  const auto box = Subspace::continuous_box({0, -1}, {1, 1});
  ComponentId id{0, "knob"};
  CHECK(validate(Configuration{id, {0.5, -1.0}}, box));
  CHECK_FALSE(validate(Configuration{id, {1.5, 0.0}}, box));
  CHECK_FALSE(validate(Configuration{id, {0.5}}, box));

  const auto bits = Subspace::binary_set(3, ResourceConstraint{{1.0, 2.0, 3.0}, 3.0});
  CHECK(validate(Configuration{id, {1, 1, 0}}, bits));
  CHECK_FALSE(validate(Configuration{id, {1, 1, 1}}, bits));
  CHECK_FALSE(validate(Configuration{id, {0.5, 0, 0}}, bits));
  CHECK(resource_usage(std::vector<double>{1, 0, 1}, bits) == 4.0);

  const auto cat = Subspace::categorical_tuple({2, 3});
  CHECK(validate(Configuration{id, {1, 2}}, cat));
  CHECK_FALSE(validate(Configuration{id, {2, 0}}, cat));
  CHECK_FALSE(validate(Configuration{id, {0.5, 0}}, cat));
}

TEST_CASE("joint validation checks component order") {
  std::vector<Subspace> spaces{Subspace::binary_set(2), Subspace::categorical_tuple({2})};
  JointConfiguration j{{Configuration{{0, "a"}, {0, 1}}, Configuration{{1, "b"}, {1}}}};
  CHECK(validate(j, spaces));
  std::swap(j.configurations[0].component, j.configurations[1].component);
  CHECK_FALSE(validate(j, spaces));
}

TEST_CASE("sampling respects every subspace") {
  Rng rng(1);
  const auto bits = Subspace::binary_set(12, ResourceConstraint{std::vector<double>(12, 1.0), 2.0});
  const auto box = Subspace::continuous_box({-1, 2}, {1, 3});
  const auto cat = Subspace::categorical_tuple({3, 5});
  for (int i = 0; i < 500; ++i) {
    CHECK(validate(Configuration{{0, "x"}, sample_uniform(bits, rng)}, bits));
    CHECK(validate(Configuration{{0, "x"}, sample_uniform(box, rng)}, box));
    CHECK(validate(Configuration{{0, "x"}, sample_uniform(cat, rng)}, cat));
  }
}

TEST_CASE("defaults, encoding and grid levels") {
  const auto box = Subspace::continuous_box({0, 10}, {1, 20});
  CHECK(default_configuration({0, "k"}, box).values == std::vector<double>{0, 10});
  CHECK(default_configuration({0, "c"}, Subspace::categorical_tuple({3, 3})).values == std::vector<double>{0, 0});

  const auto cat = Subspace::categorical_tuple({3, 2});
  CHECK(encode(std::vector<double>{2, 0}, cat) == std::vector<double>{0, 0, 1, 1, 0});
  CHECK(encode(std::vector<double>{0.5, 15}, box) == std::vector<double>{0.5, 15});
  CHECK(encode(std::vector<double>{1, 0, 1}, Subspace::binary_set(3)) == std::vector<double>{1, 0, 1});

  const auto levels = grid_levels(box, 1);
  REQUIRE(levels.size() == 3);
  CHECK(levels[0] == doctest::Approx(13.0));
  CHECK(levels[1] == doctest::Approx(15.0));
  CHECK(levels[2] == doctest::Approx(17.0));
}

TEST_CASE("reward histories reject negative rewards") {
  RewardHistory h({0, "a"});
  h.append(0.0);
  h.append(2.5);
  CHECK(h.size() == 2);
  CHECK_THROWS_AS(h.append(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(h.append(std::nan("")), std::invalid_argument);
  CHECK(h.size() == 2);
}

TEST_CASE("task validation") {
  TuningTask t;
  t.components = {ComponentSpec{{0, "index"}, AgentKind::BO, "BO"}, ComponentSpec{{1, "knob"}, AgentKind::RL, "RL"}};
  t.tuning_budget = 1000;
  t.sub_budget = 100;
  CHECK_NOTHROW(t.validate());
  auto bad = t;
  bad.components.clear();
  CHECK_THROWS(bad.validate());
  bad = t;
  bad.sub_budget = 2000;
  CHECK_THROWS(bad.validate());
  bad = t;
  bad.buffer_size = 0;
  CHECK_THROWS(bad.validate());
  bad = t;
  bad.components[1].id.name = "index";
  CHECK_THROWS(bad.validate());
  bad = t;
  bad.rfactor = 0.0;
  CHECK_THROWS(bad.validate());
  CHECK(t.buffer_size == 7);
  CHECK(agent_kind_from_string(to_string(AgentKind::RLEstimator)) == AgentKind::RLEstimator);
}
