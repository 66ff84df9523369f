#include "pss/cli.hpp"

int main(int argc, char** argv) { return pss::cli::run(argc, argv); }
