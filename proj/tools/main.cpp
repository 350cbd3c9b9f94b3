#include "cli.hpp"

int main(int argc, char** argv) { return tidy::cli_dispatch(argc, argv); }
