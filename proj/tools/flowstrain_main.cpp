#include "flowstrain/cli.hpp"

int main(int argc, char **argv) { return flowstrain::cli::run(argc, argv); }
