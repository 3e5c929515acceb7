#include "transloop/cli.hpp"

int main(int argc, char** argv) { return transloop::cli::run_main(argc, argv); }
