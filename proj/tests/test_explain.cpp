#include <doctest.h>

TEST_SUITE("explain") {

}  // TEST_SUITE
