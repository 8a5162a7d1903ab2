#include <string>

#include "doctest.h"
#include "otsep/error.hpp"
#include "otsep/measures.hpp"
#include "otsep/synth.hpp"
#include "test_support.hpp"

using namespace otsep;
using namespace otsep::test;

TEST_CASE("total_mass sums the masses") {
  const DiscreteMeasure mu = measure({pt({0.0}), pt({1.0})}, {0.25, 0.5});
  CHECK(mu.total_mass() == doctest::Approx(0.75));
  CHECK(mu.size() == 2);
  CHECK(mu.dim() == 1);
}

TEST_CASE("a minimal two-row dataset loads") {
  const std::string path = temp_path("mini.csv");
  write_file(path,
             "t,particle_id,x_0,x_1,mass\n"
             "1,0,0.5,-1.25,1\n"
             "2,0,1.5,0.75,1\n");
  const ObservationSequence seq = load_dataset(path);
  CHECK(seq.T() == 2);
  CHECK(seq.d == 2);
  CHECK(seq.points_at(0) == 1);
  CHECK(seq.measures[0].points[0][0] == 0.5);
  CHECK(seq.measures[0].points[0][1] == -1.25);
  CHECK(seq.measures[1].points[0][0] == 1.5);
  CHECK(seq.measures[1].masses[0] == 1.0);
  CHECK(seq.particle_ids[0][0] == 0);
  CHECK_FALSE(seq.has_labels());
}

TEST_CASE("a label column populates the truth table") {
  const std::string path = temp_path("labeled.csv");
  write_file(path,
             "t,particle_id,x_0,mass,label\n"
             "1,0,0,1,1\n"
             "1,1,2,1,0\n"
             "2,0,1,1,1\n"
             "2,1,3,1,0\n");
  const ObservationSequence seq = load_dataset(path);
  REQUIRE(seq.has_labels());
  CHECK(seq.truth_labels[0] == std::vector<int>{1, 0});
  CHECK(seq.truth_labels[1] == std::vector<int>{1, 0});
}

TEST_CASE("unbalanced total mass is rejected") {
  const std::string path = temp_path("unbalanced.csv");
  write_file(path,
             "t,particle_id,x_0,mass\n"
             "1,0,0,1\n"
             "2,0,1,2\n");
  CHECK_THROWS_WITH_AS(load_dataset(path),
                       doctest::Contains("total mass at t=2"), ValidationError);
}

TEST_CASE("mass imbalance within the relative tolerance passes") {
  ObservationSequence seq = make_seq({measure({pt({0.0})}, {1.0}),
                                      measure({pt({1.0})}, {1.0 + 1e-12})});
  CHECK_NOTHROW(validate(seq));
  seq.measures[1].masses[0] = 1.0 + 1e-6;
  CHECK_THROWS_AS(validate(seq), ValidationError);
}

TEST_CASE("a negative mass names its time point") {
  const std::string path = temp_path("negmass.csv");
  write_file(path,
             "t,particle_id,x_0,mass\n"
             "1,0,0,1\n"
             "2,0,1,1\n"
             "3,0,2,-1\n");
  CHECK_THROWS_WITH_AS(load_dataset(path),
                       doctest::Contains("negative or non-finite mass at t=3"),
                       ValidationError);
}

TEST_CASE("rows of mixed dimension are rejected") {
  const std::string path = temp_path("ragged.csv");
  write_file(path,
             "t,particle_id,x_0,x_1,mass\n"
             "1,0,0,0,1\n"
             "2,0,1,1\n");
  CHECK_THROWS_AS(load_dataset(path), ValidationError);
}

TEST_CASE("a single snapshot is not a sequence") {
  ObservationSequence seq = make_seq({measure({pt({0.0})}, {1.0})});
  CHECK_THROWS_WITH_AS(validate(seq), doctest::Contains("at least 2"), ValidationError);
}

TEST_CASE("empty measures and non-finite values are rejected") {
  ObservationSequence seq = make_seq({measure({pt({0.0})}, {1.0}),
                                      measure({pt({1.0})}, {1.0})});
  SUBCASE("empty measure") {
    seq.measures[1].points.clear();
    seq.measures[1].masses.clear();
    seq.particle_ids[1].clear();
    CHECK_THROWS_WITH_AS(validate(seq), doctest::Contains("empty measure at t=2"),
                         ValidationError);
  }
  SUBCASE("non-finite coordinate") {
    seq.measures[0].points[0][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(validate(seq), doctest::Contains("non-finite"), ValidationError);
  }
  SUBCASE("missing particle id table") {
    seq.particle_ids.clear();
    CHECK_THROWS_AS(validate(seq), ValidationError);
  }
}

TEST_CASE("every violation is listed at once") {
  ObservationSequence seq = make_seq({measure({pt({0.0})}, {1.0}),
                                      measure({pt({1.0}), pt({2.0})}, {-1.0, 1.0})});
  try {
    validate(seq);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("negative or non-finite mass at t=2") != std::string::npos);
  }
}

TEST_CASE("save and load round-trip a simulated dataset") {
  SimConfig cfg;
  cfg.seed = 42;
  const ObservationSequence seq = sample_instance(cfg).seq;
  const std::string path = temp_path("roundtrip.csv");
  save_dataset(seq, path);
  const ObservationSequence back = load_dataset(path);

  REQUIRE(back.T() == seq.T());
  CHECK(back.d == seq.d);
  for (int t = 0; t < seq.T(); ++t) {
    REQUIRE(back.points_at(t) == seq.points_at(t));
    for (int i = 0; i < seq.points_at(t); ++i) {
      CHECK(same_vec(back.measures[t].points[i], seq.measures[t].points[i]));
      CHECK(back.measures[t].masses[i] == seq.measures[t].masses[i]);
    }
    CHECK(back.particle_ids[t] == seq.particle_ids[t]);
    CHECK(back.truth_labels[t] == seq.truth_labels[t]);
  }

  // A second save of the loaded copy reproduces the file byte for byte.
  const std::string path2 = temp_path("roundtrip2.csv");
  save_dataset(back, path2);
  CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("loading a missing file is an io error") {
  CHECK_THROWS_AS(load_dataset(temp_path("does_not_exist.csv")), IoError);
}

TEST_CASE("row order within a time point defines point order") {
  const std::string path = temp_path("order.csv");
  write_file(path,
             "t,particle_id,x_0,mass\n"
             "2,7,10,1\n"
             "1,3,0,1\n"
             "1,4,5,1\n"
             "2,8,11,1\n");
  const ObservationSequence seq = load_dataset(path);
  CHECK(seq.particle_ids[0] == std::vector<int>{3, 4});
  CHECK(seq.particle_ids[1] == std::vector<int>{7, 8});
  CHECK(seq.measures[0].points[0][0] == 0.0);
  CHECK(seq.measures[0].points[1][0] == 5.0);
}
