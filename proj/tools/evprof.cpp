#include <evprof/cli.hpp>

int main(int argc, char** argv) { return evprof::cli::run_cli(argc, argv); }
