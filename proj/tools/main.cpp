#include "cli_app.hpp"

int main(int argc, char** argv) { return polyrad::cli::run(argc, argv); }
