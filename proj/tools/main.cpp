#include "paneltk/cli.hpp"

int main(int argc, char** argv) { return paneltk::cli::run(argc, argv); }
