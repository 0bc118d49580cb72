// Builds a tiny labeled database, then classifies a few queries with 1-NN under L2
// and with cosine class centroids.

#include <iostream>
#include <memory>
#include <random>

#include "trapdex/trapdex.hpp"

int main() {
  using namespace trapdex;

  const LabelSpace labels({"bobcat", "coyote", "rabbit"});
  const std::vector<std::vector<float>> centers = {{8, 0, 0, 0}, {0, 8, 0, 0}, {0, 0, 8, 0}};

  std::mt19937 rng(7);
  std::normal_distribution<float> noise(0.0f, 0.5f);
  auto db = std::make_shared<EmbeddingMatrix>(4, Variant::cropped);
  EmbeddingMatrix queries(4, Variant::cropped);
  for (LabelId c = 0; c < 3; ++c) {
    for (int i = 0; i < 10; ++i) {
      std::vector<float> v = centers[c];
      for (auto& x : v) x += noise(rng);
      db->push_back(labels.name(c) + "_" + std::to_string(i), c, "loc" + std::to_string(i % 2), v);
    }
    std::vector<float> q = centers[c];
    for (auto& x : q) x += noise(rng);
    queries.push_back("query_" + labels.name(c), std::nullopt, "loc9", q);
  }

  const FlatIndex index(std::shared_ptr<const EmbeddingMatrix>(db), Metric::l2);
  const auto knn = retrieval_provider({&index, nullptr}, queries, {Metric::l2, MatchMode::knn, 1});

  const auto centroids = class_centroids(*db);
  const auto centr = retrieval_provider({nullptr, &centroids}, queries, {Metric::cosine, MatchMode::centroid, 1});

  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& id = queries.id(q);
    std::cout << id << ": 1-NN -> " << labels.name(knn.find(id, Variant::cropped)->front().label)
              << ", cosine centroid -> " << labels.name(centr.find(id, Variant::cropped)->front().label) << '\n';
  }
}
