#include <set>

#include "doctest.h"
#include "error.hpp"
#include "verify.hpp"

using namespace pointode;

TEST_SUITE("verify") {

TEST_CASE("registry names are stable, unique, and described") {
  REQUIRE(verify::property_count() == 7);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < verify::property_count(); ++i) {
    const std::string& name = verify::property_name(i);
    CHECK(!name.empty());
    CHECK(!verify::property_summary(i).empty());
    for (char c : name) CHECK((std::islower(static_cast<unsigned char>(c)) || c == '-'));
    CHECK(seen.insert(name).second);
  }
  CHECK(verify::property_name(0) == "permutation-invariance");
}

TEST_CASE("every property holds across a hundred seeds") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed)
    for (std::size_t i = 0; i < verify::property_count(); ++i) {
      CAPTURE(seed);
      CAPTURE(verify::property_name(i));
      CHECK(verify::run_property(i, seed));
    }
}

TEST_CASE("out-of-range property index is rejected") {
  CHECK_THROWS_AS(verify::property_name(verify::property_count()), Error);
  CHECK_THROWS_AS(verify::property_summary(verify::property_count()), Error);
  CHECK_THROWS_AS(verify::run_property(verify::property_count(), 1), Error);
}

}  // TEST_SUITE
