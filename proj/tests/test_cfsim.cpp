#include <doctest.h>

TEST_SUITE("cfsim") {

}  // TEST_SUITE
