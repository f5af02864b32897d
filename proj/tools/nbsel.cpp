#include "nbsel/cli.hpp"

int main(int argc, char** argv) { return nbsel::cli::cli_dispatch(argc, argv); }
