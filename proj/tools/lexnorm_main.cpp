#include "lexnorm/cli.hpp"

int main(int argc, char** argv) { return lexnorm::run_cli(argc, argv); }
