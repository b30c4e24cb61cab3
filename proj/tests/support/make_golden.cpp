// Regenerates tests/golden/golden.json. Run only when a fixture change is
// intended, then review the diff.
#include <fstream>
#include <iostream>

#include "support/golden.hpp"

int main() {
  const auto path = std::string(MATS_GOLDEN_DIR) + "/golden.json";
  std::ofstream out(path);
  out << golden::compute().dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
  return out ? 0 : 1;
}
