#include <catch2/catch_amalgamated.hpp>
#include "homodyne/homodyne.hpp"

TEST_CASE("placeholder test_config_io") { CHECK(true); }
