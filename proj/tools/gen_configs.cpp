// Writes the reference graph configs, or with --check verifies that a
// directory holds byte-identical copies.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "salengine/architectures.hpp"
#include "salengine/graph.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Generate reference graph configs", "gen_configs"};
  std::string dir = "configs";
  bool check = false;
  app.add_option("dir", dir, "Output directory");
  app.add_flag("--check", check, "Compare instead of writing");
  CLI11_PARSE(app, argc, argv);

  int stale = 0;
  for (const auto& [file, cfg] : salengine::reference_configs()) {
    const fs::path path = fs::path(dir) / file;
    const std::string text = salengine::to_json_text(cfg);
    if (check) {
      std::ifstream in(path, std::ios::binary);
      std::ostringstream os;
      os << in.rdbuf();
      if (!in || os.str() != text) {
        std::cerr << "stale: " << path.string() << "\n";
        ++stale;
      }
      continue;
    }
    fs::create_directories(dir);
    std::ofstream(path, std::ios::binary) << text;
    std::cout << path.string() << "\n";
  }
  return stale == 0 ? 0 : 1;
}
