#include <iostream>

#include "lstmbt/pipeline.hpp"

int main(int argc, char** argv) {
  lstmbt::RunConfig cfg;
  try {
    cfg = lstmbt::validate_config(argc, argv);
  } catch (const lstmbt::HelpRequested& help) {
    std::cout << help.what();
    return lstmbt::kExitOk;
  } catch (const lstmbt::ConfigError& e) {
    std::cerr << "lstmbt: " << e.what() << "\n";
    return lstmbt::kExitConfig;
  }
  return lstmbt::run(cfg, std::cout, std::cerr);
}
