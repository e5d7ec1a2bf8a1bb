#include "../src/cli.hpp"

int main(int argc, char** argv) { return stormvi::cli::run(argc, argv); }
