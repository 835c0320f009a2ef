#include "netmo/cli.hpp"

int main(int argc, char** argv) { return netmo::cli::run(argc, argv); }
