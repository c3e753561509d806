// Writes the bundled miner fixture: observations of the abutting-objects
// scene and the manifest an O(n^2) scan over their footprints produces.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pmatch/io.hpp"
#include "pmatch/miner.hpp"
#include "pmatch/polygon.hpp"
#include "pmatch/simulator.hpp"

using namespace pmatch;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  // Every eighth frame keeps the fixture small.
  const SceneOutput scene = generate_scene(abutting_scene_spec(1));
  std::vector<Observation> observations;
  for (std::size_t i = 0; i < scene.observations.size(); i += 8) observations.push_back(scene.observations[i]);
  const MinerConfig cfg;
  const FootprintSet set = build_footprints(observations, cfg);

  PairManifest manifest;
  for (const auto& obs : observations) manifest.add_query(obs.key());
  for (const auto& a : set.footprints) {
    auto& list = manifest.entries[{a.source.image_id, a.source.box_id}];
    for (const auto& b : set.footprints) {
      if (&a == &b || a.source.agent_id != b.source.agent_id || a.source.episode_id != b.source.episode_id) continue;
      const double overlap = overlap_area(a, b);
      if (!(overlap > 0.0) || overlap < cfg.min_overlap_area) continue;
      list.push_back({{b.source.image_id, b.source.box_id}, overlap, iou(a, b)});
    }
    std::sort(list.begin(), list.end(), [](const Candidate& x, const Candidate& y) {
      if (x.overlap_m2 != y.overlap_m2) return x.overlap_m2 > y.overlap_m2;
      return x.key < y.key;
    });
  }

  std::ofstream obs_out(dir / "observations.jsonl");
  write_observations(obs_out, observations);
  std::ofstream manifest_out(dir / "expected_manifest.jsonl");
  write_manifest(manifest_out, manifest);
  std::cout << "observations " << observations.size() << " pairs " << manifest.pair_count() << "\n";
  return 0;
}
