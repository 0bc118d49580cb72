// Routes three images through the detection-conditioned classifier arrangement:
// a detected animal goes to the crop classifier, a frame without detections either
// becomes "empty" or goes to the full-image classifier.

#include <iostream>

#include "trapdex/trapdex.hpp"

int main() {
  using namespace trapdex;

  const LabelSpace labels({"empty", "deer", "fox"});

  ScoreProvider crop, full;
  crop.add("img1", Variant::cropped, {{1, 0.9}, {2, 0.1}});
  full.add("img2", Variant::full, {{2, 0.7}, {1, 0.3}});
  full.add("img3", Variant::full, {{1, 0.6}});

  DetectionRecord deer{"img1", DetectionCategory::animal, 0.93, {0.2, 0.3, 0.25, 0.2}};
  const std::vector<std::pair<std::string, std::vector<DetectionRecord>>> images = {
      {"img1", {deer}}, {"img2", {}}, {"img3", {{"img3", DetectionCategory::animal, 0.05, {0.1, 0.1, 0.1, 0.1}}}}};

  for (auto strategy : {EmptyStrategy::declare_empty, EmptyStrategy::second_classifier}) {
    RouterConfig cfg;
    cfg.empty_strategy = strategy;
    cfg.empty_label = *labels.empty_id();
    std::cout << (strategy == EmptyStrategy::declare_empty ? "declare empty:\n" : "second classifier:\n");
    for (const auto& [id, dets] : images) {
      const auto primary = geometry::select_primary_detection(dets, cfg.conf_threshold);
      const auto p = route_and_classify(id, primary, crop, &full, cfg);
      std::cout << "  " << id << " -> " << labels.name(p.head()) << " (" << to_string(p.provenance) << ")\n";
    }
  }
}
