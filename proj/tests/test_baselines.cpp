#include <doctest.h>

TEST_SUITE("baselines") {

}  // TEST_SUITE
