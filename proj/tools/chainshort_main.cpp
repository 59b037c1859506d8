#include "chainshort/cli.hpp"

int main(int argc, char** argv) { return chainshort::cli_main(argc, argv); }
