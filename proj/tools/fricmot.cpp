#include "fricmot/cli.hpp"

int main(int argc, char** argv) { return fricmot::cli::main(argc, argv); }
