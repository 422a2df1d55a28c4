#include <catch2/catch_amalgamated.hpp>

#include "twinlat/cli.hpp"

TEST_CASE("stub", "[cli]") { CHECK(true); }
