#include "cli_app.hpp"

int main(int argc, char** argv) { return logcg::cli::run(argc, argv); }
