#include "cdm/cli.hpp"

int main(int argc, char** argv) { return cdm::cli_main(argc, argv); }
