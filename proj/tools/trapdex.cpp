#include "trapdex_cli.hpp"

int main(int argc, char** argv) { return trapdex::cli::run(argc, argv); }
