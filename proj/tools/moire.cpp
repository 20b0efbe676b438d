#include "moire/cli.hpp"

int main(int argc, char** argv) { return moire::cli::dispatch(argc, argv); }
