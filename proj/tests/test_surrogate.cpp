#include <doctest.h>

TEST_SUITE("surrogate") {

}  // TEST_SUITE
