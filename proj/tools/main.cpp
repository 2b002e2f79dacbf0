#include "edgeadapt/harness.hpp"

int main(int argc, char** argv) { return edgeadapt::cli_main(argc, argv); }
