#include "cli.hpp"

int main(int argc, char** argv) { return pmugbp::cli::run(argc, argv); }
