#include "bhwr/cli.hpp"

int main(int argc, char** argv) { return bhwr::cli::cli_dispatch(argc, argv); }
