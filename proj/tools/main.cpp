#include "warpconv/cli.hpp"

int main(int argc, char** argv) { return warpconv::cli_dispatch(argc, argv); }
