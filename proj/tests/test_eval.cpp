#include <doctest.h>

TEST_SUITE("eval") {

}  // TEST_SUITE
