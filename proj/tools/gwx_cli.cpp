#include "gwx/cli.hpp"

int main(int argc, char** argv) { return gwx::cli::dispatch(argc, argv); }
