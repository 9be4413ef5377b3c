#include "cli_app.hpp"

int main(int argc, char** argv) { return specsurg::cli::run(argc, argv); }
