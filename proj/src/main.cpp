#include "rebound/cli_io.hpp"

int main(int argc, char** argv) { return rebound::cli_dispatch(argc, argv); }
