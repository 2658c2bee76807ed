// Runs the pipeline over a scripted list of responses (JSON array of strings,
// in call order) and writes the matching replay fixture file.
//
//   record_fixture SCRIPT.json OUT.json [SEED]

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "storyforge/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace storyforge;
  if (argc < 3) {
    std::cerr << "usage: record_fixture SCRIPT.json OUT.json [SEED]\n";
    return 2;
  }
  try {
    std::ifstream in(argv[1]);
    if (!in) throw Error(Errc::BadConfig, std::string("cannot read ") + argv[1]);
    ScriptedBackend backend(nlohmann::json::parse(in).get<std::vector<std::string>>());
    PipelineConfig cfg;
    cfg.backend = "replay";
    cfg.rng_seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 7;
    GenerationTrace trace;
    const LevelBundle bundle = build_level(cfg, backend, trace);
    if (backend.remaining() != 0) {
      throw Error(Errc::BadConfig, std::to_string(backend.remaining()) + " scripted responses were never requested");
    }
    std::ofstream out(argv[2], std::ios::binary);
    out << trace.replay_fixtures().dump(2) << "\n";
    std::cout << trace.records().size() << " exchanges recorded; map " << bundle.grid.rows() << "x" << bundle.grid.cols()
              << ", valid " << bundle.validity.valid << ", rounds " << bundle.validity.world_rounds << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
