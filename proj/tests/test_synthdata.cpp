#include <doctest.h>

TEST_SUITE("synthdata") {

}  // TEST_SUITE
