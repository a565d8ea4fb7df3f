#include "fraudlens/cli.hpp"

int main(int argc, char** argv) { return fraudlens::cli::run(argc, argv); }
