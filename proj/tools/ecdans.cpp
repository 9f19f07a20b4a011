#include "ecdans/cli.hpp"

int main(int argc, char** argv) { return ecdans::cli::run(argc, argv); }
