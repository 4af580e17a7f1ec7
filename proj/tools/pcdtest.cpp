#include "pcdtest/cli.hpp"

int main(int argc, char** argv) { return pcdtest::run_cli(argc, argv); }
