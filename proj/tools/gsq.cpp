#include "gsq/cli/run.hpp"

int main(int argc, char** argv) { return gsq::cli::cli_main(argc, argv); }
