// Builds the amalgamated Catch2 translation unit once for the whole suite.
#include <catch2/catch_amalgamated.cpp>
