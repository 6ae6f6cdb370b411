#include "ordcrowd/cli.hpp"

int main(int argc, char** argv) { return ordcrowd::cli::run(argc, argv); }
