#include "mcsbi/cli.hpp"

int main(int argc, char** argv) { return mcsbi::cli::main(argc, argv); }
