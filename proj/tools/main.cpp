#include "selfpro/cli.hpp"

int main(int argc, char** argv) { return selfpro::dispatch(argc, argv); }
