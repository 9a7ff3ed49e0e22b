#include "cli.hpp"

int main(int argc, char** argv) {
  return pft::cli::run(argc, argv);
}
