#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trapdex/trapdex.hpp"

// Command-line front end. Exit status: 0 success, 1 invalid invocation, 2 runtime failure.

namespace trapdex::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Non-blank lines, without trailing carriage returns. Owns its strings so it is safe on temporaries.
inline std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) out.emplace_back(line);
    start = end + 1;
  }
  return out;
}

/// Routes output to a file when a path is given, otherwise to the provided stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw Error("cannot write " + path);
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }
  void finish() {
    os_->flush();
    if (!*os_) throw Error("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

/// Image id for a detector entry: the file stem unless full names are kept.
inline std::string detection_image_id(const std::string& file, bool keep_file_names) {
  if (keep_file_names) return file;
  std::string name = file;
  for (char& c : name)
    if (c == '\\') c = '/';
  return fs::path(name).stem().string();
}

struct Options {
  std::string config;
  unsigned threads = 1;
  int verbose = 0;

  // ingest
  std::string input, out, variant = "full", truth;
  std::size_t dimension = 0;
  bool database = false;

  // crop-plan
  std::string detections, dims;
  double conf = geometry::kDefaultConfThreshold;
  bool animals_only = false, clip = false, keep_file_names = false;

  // search / classify
  std::string db, queries, full_db, full_queries, crop_preds, full_preds;
  std::string metric = "l2", mode = "knn", strategy = "second", arrangement = "two";
  std::size_t k = 1;

  // evaluate
  std::string preds, group_by = "split";

  // split
  std::string scheme = "wct";
  std::uint64_t seed = 0;
  std::size_t x = 0;
  double test_fraction = 1.0 / 3.0, train_fraction = 0.8;
  bool stratified = false;

  // prompt
  std::string labels, captions, responses;
  bool catalog = false;
};

inline LabelSpace read_label_list(const std::string& path) {
  LabelSpace ls;
  for (const auto& line : lines_of(slurp(path))) ls.add(std::string(line));
  return ls;
}

// ---------------------------------------------------------------------------- ingest

inline void cmd_ingest(const Options& o, std::ostream& out, std::ostream& log) {
  const auto variant = parse_variant(o.variant);
  if (!variant) throw ValidationError("unknown variant '" + o.variant + "'");
  std::optional<ingest::AnnotationSet> truth;
  std::unordered_map<std::string, const ImageRecord*> by_id;
  if (!o.truth.empty()) {
    truth = ingest::parse_coco_cameratraps(slurp(o.truth), o.truth);
    for (const auto& im : truth->images) by_id.emplace(im.image_id, &im);
  }

  std::vector<EmbeddingRecord> records;
  std::size_t line_no = 0;
  for (const auto& line : lines_of(slurp(o.input))) {
    ++line_no;
    const auto at = o.input + " line " + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      EmbeddingRecord r;
      r.image_id = j.at("image_id").get<std::string>();
      r.variant = *variant;
      if (j.contains("variant")) {
        const auto v = parse_variant(j.at("variant").get<std::string>());
        if (!v || *v != *variant) throw Error(at + ": variant does not match --variant " + o.variant);
      }
      const auto* im = by_id.count(r.image_id) ? by_id.at(r.image_id) : nullptr;
      if (j.contains("label") && !j.at("label").is_null()) {
        const auto& lab = j.at("label");
        if (lab.is_string()) {
          if (!truth) throw ValidationError("string labels need --truth to resolve names");
          const auto id = truth->label_space.find(lab.get<std::string>());
          if (!id) throw Error(at + ": unknown label '" + lab.get<std::string>() + "'");
          r.label = *id;
        } else {
          r.label = lab.get<LabelId>();
        }
      } else if (im) {
        r.label = im->gt_label;
      }
      if (j.contains("location") && !j.at("location").is_null()) r.location_id = ingest::detail::id_string(j.at("location"));
      else if (im) r.location_id = im->location_id;
      r.vector = j.at("vector").get<std::vector<float>>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(at + ": " + e.what());
    }
  }

  store::WriteOptions wo;
  if (o.dimension) wo.dimension = o.dimension;
  wo.variant = *variant;
  wo.labels = truth ? &truth->label_space : nullptr;
  wo.retrieval_database = o.database;
  if (o.database) {
    for (const auto& r : records)
      if (!r.label) throw Error("database record '" + r.image_id + "' has no label");
  }
  const auto info = store::write_embedding_store(records, o.out, wo);
  ojson summary;
  summary["store"] = info.path.string();
  summary["dimension"] = info.dimension;
  summary["count"] = info.count;
  summary["variant"] = to_string(info.variant);
  out << summary.dump() << '\n';
  if (o.verbose) log << "ingested " << info.count << " records into " << info.path.string() << '\n';
}

// ---------------------------------------------------------------------------- crop-plan

inline void cmd_crop_plan(const Options& o, std::ostream& out, std::ostream& log) {
  const auto det_file = ingest::parse_megadetector_json(slurp(o.detections), o.detections);
  std::unordered_map<std::string, std::pair<int, int>> dims;
  if (!o.dims.empty()) {
    std::size_t row = 0;
    for (const auto& line : lines_of(slurp(o.dims))) {
      ++row;
      std::vector<std::string> cells;
      std::stringstream ss{std::string(line)};
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      if (cells.size() != 3) throw Error(o.dims + " row " + std::to_string(row) + ": expected image_id,width,height");
      if (row == 1 && cells[1] == "width") continue;
      try {
        dims[cells[0]] = {std::stoi(cells[1]), std::stoi(cells[2])};
      } catch (const std::exception&) {
        throw Error(o.dims + " row " + std::to_string(row) + ": width/height must be integers");
      }
    }
  } else {
    const auto truth = ingest::parse_coco_cameratraps(slurp(o.truth), o.truth);
    for (const auto& im : truth.images) {
      dims[im.image_id] = {im.width, im.height};
      dims[detection_image_id(im.file_name, o.keep_file_names)] = {im.width, im.height};
    }
  }

  geometry::CropOptions co;
  co.pad_oversize = !o.clip;
  std::size_t planned = 0, skipped = 0;
  for (const auto& im : det_file.images) {
    const auto id = detection_image_id(im.file, o.keep_file_names);
    const auto primary = geometry::select_primary_detection(im.detections, o.conf, o.animals_only);
    if (!primary) {
      ++skipped;
      continue;
    }
    auto d = dims.find(id);
    if (d == dims.end()) throw Error("no image dimensions for '" + id + "'");
    const auto plan = geometry::square_crop_rect(primary->bbox, d->second.first, d->second.second, co);
    ojson j;
    j["image_id"] = id;
    j["rect"] = {plan.rect.x, plan.rect.y, plan.rect.w, plan.rect.h};
    j["pad"] = {plan.pad_left, plan.pad_top, plan.pad_right, plan.pad_bottom};
    j["side"] = plan.side;
    out << j.dump() << '\n';
    ++planned;
  }
  if (o.verbose) log << planned << " crop plans, " << skipped << " images without a qualifying detection\n";
}

// ---------------------------------------------------------------------------- search

inline void cmd_search(const Options& o, std::ostream& out, std::ostream& log) {
  const auto metric = parse_metric(o.metric);
  if (!metric) throw ValidationError("unknown metric '" + o.metric + "'");
  if (o.k == 0) throw ValidationError("-k must be at least 1");
  auto db = std::make_shared<const EmbeddingMatrix>(store::read_embedding_store(o.db));
  const auto queries = store::read_embedding_store(o.queries);
  const FlatIndex index(db, *metric);
  const auto results = search_batch(index, queries, o.k, o.threads);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    ojson j;
    j["query_id"] = queries.id(q);
    j["neighbors"] = ojson::array();
    for (const auto& n : results[q]) {
      ojson nb;
      nb["id"] = n.id;
      nb["label"] = n.label ? ojson(*n.label) : ojson(nullptr);
      nb["score"] = n.score;
      j["neighbors"].push_back(std::move(nb));
    }
    out << j.dump() << '\n';
  }
  if (o.verbose) log << "searched " << queries.size() << " queries against " << db->size() << " rows\n";
}

// ---------------------------------------------------------------------------- classify

struct RetrievalSide {
  std::shared_ptr<const EmbeddingMatrix> matrix;
  std::optional<FlatIndex> index;
  std::optional<CentroidSet> centroids;

  RetrievalSide(const std::string& path, const MatchingConfig& cfg)
      : matrix(std::make_shared<const EmbeddingMatrix>(store::read_embedding_store(path))) {
    if (cfg.mode == MatchMode::knn) index.emplace(matrix, cfg.metric);
    else centroids = class_centroids(*matrix);
  }

  RetrievalDatabase db() const { return {index ? &*index : nullptr, centroids ? &*centroids : nullptr}; }
};

inline void cmd_classify(const Options& o, std::ostream& out, std::ostream& log) {
  MatchingConfig mc;
  const auto metric = parse_metric(o.metric);
  if (!metric) throw ValidationError("unknown metric '" + o.metric + "'");
  const auto mode = parse_match_mode(o.mode);
  if (!mode) throw ValidationError("unknown mode '" + o.mode + "'");
  mc.metric = *metric;
  mc.mode = *mode;
  mc.k = o.k;
  if (mc.k == 0) throw ValidationError("-k must be at least 1");

  RouterConfig rc;
  rc.conf_threshold = o.conf;
  if (o.strategy == "empty") rc.empty_strategy = EmptyStrategy::declare_empty;
  else if (o.strategy == "second") rc.empty_strategy = EmptyStrategy::second_classifier;
  else throw ValidationError("--strategy must be 'empty' or 'second'");
  if (o.arrangement == "one") rc.arrangement = Arrangement::single_shared;
  else if (o.arrangement == "two") rc.arrangement = Arrangement::two_separate;
  else throw ValidationError("--arrangement must be 'one' or 'two'");

  const bool crop_by_retrieval = !o.queries.empty();
  if (crop_by_retrieval == !o.crop_preds.empty())
    throw ValidationError("give exactly one crop classifier source: --queries (with --db) or --crop-preds");
  if (crop_by_retrieval && o.db.empty()) throw ValidationError("--queries needs --db");
  if (!o.full_db.empty() && o.full_queries.empty()) throw ValidationError("--full-db needs --full-queries");
  if (!o.full_queries.empty() && !o.full_preds.empty())
    throw ValidationError("give at most one full-image source: --full-queries or --full-preds");
  const bool has_full = !o.full_queries.empty() || !o.full_preds.empty();
  if (rc.empty_strategy == EmptyStrategy::second_classifier) {
    if (!has_full)
      throw ValidationError("--strategy second needs a full-image classifier: pass --full-preds or --full-queries");
    if (rc.arrangement == Arrangement::two_separate && !o.full_queries.empty() && o.full_db.empty())
      throw ValidationError("--arrangement two with --full-queries needs --full-db");
  }
  if (rc.arrangement == Arrangement::single_shared && !o.full_db.empty())
    throw ValidationError("--arrangement one shares --db; drop --full-db");

  std::optional<ingest::AnnotationSet> truth;
  if (!o.truth.empty()) {
    truth = ingest::parse_coco_cameratraps(slurp(o.truth), o.truth);
    if (auto e = truth->label_space.empty_id()) rc.empty_label = *e;
  }

  const auto det_file = ingest::parse_megadetector_json(slurp(o.detections), o.detections);

  ScoreProvider crop;
  ScoreProvider full;
  std::optional<RetrievalSide> shared;
  if (crop_by_retrieval) {
    shared.emplace(o.db, mc);
    const auto q = store::read_embedding_store(o.queries);
    if (q.variant() == Variant::full) throw ValidationError("--queries must hold cropped or segmented embeddings");
    rc.crop_variant = q.variant();
    crop = retrieval_provider(shared->db(), q, mc, o.threads);
  } else {
    crop = predictions::load_provider(o.crop_preds);
  }

  // With one shared classifier, full-image rankings live in the crop provider's table.
  ScoreProvider& full_target = rc.arrangement == Arrangement::single_shared ? crop : full;
  if (!o.full_preds.empty()) {
    full_target.merge(predictions::load_provider(o.full_preds));
  } else if (!o.full_queries.empty()) {
    const auto q = store::read_embedding_store(o.full_queries);
    if (q.variant() != Variant::full) throw ValidationError("--full-queries must hold full-image embeddings");
    if (rc.arrangement == Arrangement::single_shared) {
      if (!shared) throw ValidationError("--arrangement one with --full-queries needs --db");
      full_target.merge(retrieval_provider(shared->db(), q, mc, o.threads));
    } else {
      const RetrievalSide side(o.full_db, mc);
      full_target.merge(retrieval_provider(side.db(), q, mc, o.threads));
    }
  }

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& im : det_file.images) {
    const auto id = detection_image_id(im.file, o.keep_file_names);
    const auto primary = geometry::select_primary_detection(im.detections, rc.conf_threshold, o.animals_only);
    const auto p = route_and_classify(id, primary, crop, has_full ? &full : nullptr, rc);
    ++counts[static_cast<int>(p.provenance)];
    out << predictions::to_jsonl(p.image_id, p.variant, p.ranking, p.provenance) << '\n';
  }
  if (o.verbose)
    log << "routed " << det_file.images.size() << " images: " << counts[0] << " crop, " << counts[1] << " full, "
        << counts[2] << " empty\n";
}

// ---------------------------------------------------------------------------- evaluate

inline ojson block_json(const eval::MetricBlock& b, const LabelSpace& ls) {
  ojson j;
  j["count"] = b.count;
  j["top1"] = b.top1;
  j["top3"] = b.top3;
  j["macro_f1"] = b.macro_f1;
  j["per_class"] = ojson::array();
  j["predicted_only"] = ojson::array();
  for (const auto& c : b.per_class) {
    ojson e;
    e["label"] = c.label;
    e["name"] = ls.contains(c.label) ? ls.name(c.label) : (c.label == kEmptyLabel ? std::string(kEmptyName) : "?");
    e["support"] = c.support();
    e["precision"] = c.precision;
    e["recall"] = c.recall;
    e["f1"] = c.f1;
    (c.in_truth ? j["per_class"] : j["predicted_only"]).push_back(std::move(e));
  }
  return j;
}

inline std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << v * 100.0;
  return s.str();
}

inline void cmd_evaluate(const Options& o, std::ostream& out, std::ostream& log) {
  if (o.group_by != "split" && o.group_by != "location" && o.group_by != "none")
    throw ValidationError("--group-by must be split, location or none");
  const auto truth = ingest::parse_coco_cameratraps(slurp(o.truth), o.truth);
  const auto entries = predictions::parse_jsonl(slurp(o.preds), o.preds);
  std::unordered_map<std::string, const predictions::Entry*> by_id;
  for (const auto& e : entries)
    if (!by_id.emplace(e.image_id, &e).second) throw Error(o.preds + ": duplicate prediction for '" + e.image_id + "'");

  const auto empty_id = truth.label_space.empty_id();
  std::vector<std::vector<LabelId>> ranked;
  std::vector<LabelId> gts;
  std::vector<std::string> groups;
  std::size_t missing = 0, matched = 0;
  for (const auto& im : truth.images) {
    if (!im.gt_label) continue;
    auto it = by_id.find(im.image_id);
    if (it == by_id.end()) {
      ++missing;
      continue;
    }
    ++matched;
    std::vector<LabelId> r;
    for (const auto& rl : it->second->ranking) {
      const LabelId l = (rl.label == kEmptyLabel && empty_id) ? *empty_id : rl.label;
      if (std::find(r.begin(), r.end(), l) == r.end()) r.push_back(l);
    }
    ranked.push_back(std::move(r));
    gts.push_back(*im.gt_label);
    if (o.group_by == "split") groups.emplace_back(to_string(im.split_tag));
    else if (o.group_by == "location") groups.push_back(im.location_id);
    else groups.emplace_back("all");
  }
  if (missing) throw Error(std::to_string(missing) + " labeled images in " + o.truth + " have no prediction");
  if (gts.empty()) throw Error("no labeled images to evaluate");

  const auto rep = eval::grouped_report(ranked, gts, groups);
  ojson j;
  j["overall"] = block_json(rep.overall, truth.label_space);
  j["group_by"] = o.group_by;
  j["groups"] = ojson::object();
  for (const auto& [name, b] : rep.groups) j["groups"][name] = block_json(b, truth.label_space);
  j["macro_f1_classes"] = "ground-truth classes only";
  j["unmatched_predictions"] = entries.size() - matched;
  j["excluded_multi_species"] = truth.excluded_multi_species;

  std::ostringstream table;
  table << std::left << std::setw(16) << "group" << std::right << std::setw(8) << "n" << std::setw(8) << "Top1"
        << std::setw(8) << "Top3" << std::setw(8) << "F1_m" << '\n';
  auto row = [&](const std::string& name, const eval::MetricBlock& b) {
    table << std::left << std::setw(16) << name << std::right << std::setw(8) << b.count << std::setw(8) << pct(b.top1)
          << std::setw(8) << pct(b.top3) << std::setw(8) << pct(b.macro_f1) << '\n';
  };
  for (const auto& [name, b] : rep.groups) row(name, b);
  row("overall", rep.overall);

  if (!o.out.empty()) {
    Sink sink(o.out, out);
    *sink << j.dump(2) << '\n';
    sink.finish();
    out << table.str();
  } else {
    out << j.dump(2) << '\n';
    log << table.str();
  }
}

// ---------------------------------------------------------------------------- split

inline void cmd_split(const Options& o, std::ostream& out, std::ostream& log) {
  const auto truth = ingest::parse_coco_cameratraps(slurp(o.truth), o.truth);
  eval::SplitAssignment a;
  if (o.scheme == "wct") {
    eval::SplitConfig cfg;
    cfg.scheme = eval::SplitScheme::wct_location;
    cfg.seed = o.seed;
    cfg.test_location_fraction = o.test_fraction;
    cfg.dev_train_fraction = o.train_fraction;
    cfg.stratified = o.stratified;
    a = eval::make_wct_split(truth.images, cfg);
  } else if (o.scheme == "safari") {
    a = eval::make_safari_split(truth.images, o.x);
  } else {
    throw ValidationError("--scheme must be wct or safari");
  }
  const bool safari = o.scheme == "safari";
  out << "image_id,split\n";
  for (const auto& [id, s] : a.entries) out << id << ',' << (safari && s == eval::Split::train ? "database" : to_string(s)) << '\n';
  if (o.verbose)
    log << a.count(eval::Split::train) << " train, " << a.count(eval::Split::val) << " val, "
        << a.count(eval::Split::test) << " test\n";
}

// ---------------------------------------------------------------------------- prompt

inline void cmd_prompt(const Options& o, std::ostream& out, std::ostream&) {
  if (o.catalog) {
    for (const auto& p : zero_shot::caption_prompt_catalog()) {
      ojson j;
      j["id"] = p.id;
      j["text"] = p.text;
      out << j.dump() << '\n';
    }
    return;
  }
  LabelSpace ls;
  if (!o.truth.empty()) ls = ingest::parse_coco_cameratraps(slurp(o.truth), o.truth).label_space;
  else if (!o.labels.empty()) ls = read_label_list(o.labels);
  else throw ValidationError("prompt needs --truth or --labels (or --catalog)");
  if (o.captions.empty()) throw ValidationError("prompt needs --captions");
  const auto categories = ls.category_names();

  std::optional<zero_shot::ReplayClient> client;
  if (!o.responses.empty()) client = zero_shot::ReplayClient::from_file(o.responses);

  std::size_t line_no = 0;
  for (const auto& line : lines_of(slurp(o.captions))) {
    ++line_no;
    std::string id, caption;
    try {
      const auto j = nlohmann::json::parse(line);
      id = j.at("image_id").get<std::string>();
      caption = j.at("caption").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(o.captions + " line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto prompt = zero_shot::build_adjudication_prompt(categories, caption);
    ojson j;
    j["image_id"] = id;
    j["prompt"] = prompt;
    j["prompt_hash"] = zero_shot::prompt_hash(prompt);
    if (client) {
      const auto answer = client->complete(prompt);
      const auto label = zero_shot::parse_answer(answer, categories);
      j["response"] = answer;
      if (label) j["label"] = *ls.find(*label);
      else if (auto e = ls.empty_id()) j["label"] = *e;
      else j["label"] = kEmptyLabel;
      j["empty"] = !label.has_value();
    }
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------- entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"trapdex: retrieval and detection-routed classification of camera-trap images", "trapdex"};
  app.require_subcommand(1);
  Options o;
  app.set_config("--config", "", "Run file (TOML/INI key = value); command-line flags override it");
  app.add_option("--threads", o.threads, "Worker threads for batch search")->check(CLI::Range(1u, 1024u));
  app.add_flag("-v,--verbose", o.verbose, "Report progress on stderr");

  auto* ingest = app.add_subcommand("ingest", "Write an embedding store from JSON-lines embeddings");
  ingest->add_option("--input", o.input, "JSON lines {image_id, label, location, vector}")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", o.out, "Store directory to create")->required();
  ingest->add_option("--variant", o.variant, "full, cropped or segmented")->check(CLI::IsMember({"full", "cropped", "segmented"}));
  ingest->add_option("--dimension", o.dimension, "Declared dimension (needed for an empty input)");
  ingest->add_option("--truth", o.truth, "COCO Camera Traps file resolving label names, labels and locations")->check(CLI::ExistingFile);
  ingest->add_flag("--database", o.database, "Retrieval database: every record labeled, no 'empty' label");

  auto* crop = app.add_subcommand("crop-plan", "Emit square crop plans for primary detections");
  crop->add_option("--detections", o.detections, "MegaDetector batch JSON")->required()->check(CLI::ExistingFile);
  auto* dims_opt = crop->add_option("--dims", o.dims, "CSV image_id,width,height")->check(CLI::ExistingFile);
  auto* crop_truth = crop->add_option("--truth", o.truth, "COCO Camera Traps file with image sizes")->check(CLI::ExistingFile);
  dims_opt->excludes(crop_truth);
  crop->add_option("--conf", o.conf, "Detection confidence threshold")->check(CLI::Range(0.0, 1.0));
  crop->add_flag("--animals-only", o.animals_only, "Ignore person and vehicle detections");
  crop->add_flag("--clip", o.clip, "Shrink oversize squares to fit instead of padding");
  crop->add_flag("--keep-file-names", o.keep_file_names, "Use detector file paths as image ids instead of file stems");
  crop->add_option("--out", o.out, "Output file (default stdout)");

  auto* search = app.add_subcommand("search", "Exact top-k search of query embeddings against a database");
  search->add_option("--db", o.db, "Database store")->required()->check(CLI::ExistingDirectory);
  search->add_option("--queries", o.queries, "Query store")->required()->check(CLI::ExistingDirectory);
  search->add_option("--metric", o.metric, "l2 or cosine")->check(CLI::IsMember({"l2", "cosine"}));
  search->add_option("-k", o.k, "Neighbors per query")->check(CLI::PositiveNumber);
  search->add_option("--out", o.out, "Output file (default stdout)");

  auto* classify = app.add_subcommand("classify", "Route images by detection and classify them");
  classify->add_option("--db", o.db, "Crop classifier database store")->check(CLI::ExistingDirectory);
  classify->add_option("--queries", o.queries, "Cropped/segmented query store")->check(CLI::ExistingDirectory);
  classify->add_option("--full-db", o.full_db, "Full-image database store (arrangement two)")->check(CLI::ExistingDirectory);
  classify->add_option("--full-queries", o.full_queries, "Full-image query store")->check(CLI::ExistingDirectory);
  classify->add_option("--crop-preds", o.crop_preds, "Prediction file for the crop classifier")->check(CLI::ExistingFile);
  classify->add_option("--full-preds", o.full_preds, "Prediction file for the full-image classifier")->check(CLI::ExistingFile);
  classify->add_option("--detections", o.detections, "MegaDetector batch JSON listing every image")->required()->check(CLI::ExistingFile);
  classify->add_option("--truth", o.truth, "COCO Camera Traps file; its 'empty' label id is used by the empty rule")->check(CLI::ExistingFile);
  classify->add_option("--strategy", o.strategy, "No-detection handling: empty or second")->check(CLI::IsMember({"empty", "second"}));
  classify->add_option("--arrangement", o.arrangement, "one shared classifier or two separate")->check(CLI::IsMember({"one", "two"}));
  classify->add_option("--metric", o.metric, "l2 or cosine")->check(CLI::IsMember({"l2", "cosine"}));
  classify->add_option("--mode", o.mode, "knn or centroid")->check(CLI::IsMember({"knn", "centroid"}));
  classify->add_option("-k", o.k, "Neighbors voting in k-NN mode")->check(CLI::PositiveNumber);
  classify->add_option("--conf", o.conf, "Detection confidence threshold")->check(CLI::Range(0.0, 1.0));
  classify->add_flag("--animals-only", o.animals_only, "Only animal detections route to the crop classifier");
  classify->add_flag("--keep-file-names", o.keep_file_names, "Use detector file paths as image ids instead of file stems");
  classify->add_option("--out", o.out, "Output file (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Top-1/Top-3/macro-F1 report for a prediction file");
  evaluate->add_option("--preds", o.preds, "Prediction JSON lines")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--truth", o.truth, "COCO Camera Traps ground truth")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--group-by", o.group_by, "split, location or none")->check(CLI::IsMember({"split", "location", "none"}));
  evaluate->add_option("--out", o.out, "Write the JSON report here and the table to stdout");

  auto* split = app.add_subcommand("split", "Location-based dataset split");
  split->add_option("--truth", o.truth, "COCO Camera Traps file with image locations")->required()->check(CLI::ExistingFile);
  split->add_option("--scheme", o.scheme, "wct or safari")->check(CLI::IsMember({"wct", "safari"}));
  split->add_option("--seed", o.seed, "Shuffle seed (wct)");
  auto* x_opt = split->add_option("--x", o.x, "Number of first locations forming the database (safari)");
  split->add_option("--test-fraction", o.test_fraction, "Share of locations held out for test (wct)");
  split->add_option("--train-fraction", o.train_fraction, "Train share of development images (wct)");
  split->add_flag("--stratified", o.stratified, "Split development images per class (wct)");
  split->add_option("--out", o.out, "Output CSV (default stdout)");

  auto* prompt = app.add_subcommand("prompt", "Adjudication prompts (and parsed answers) for captions");
  prompt->add_option("--truth", o.truth, "COCO Camera Traps file supplying categories")->check(CLI::ExistingFile);
  prompt->add_option("--labels", o.labels, "Category names, one per line")->check(CLI::ExistingFile);
  prompt->add_option("--captions", o.captions, "JSON lines {image_id, caption}")->check(CLI::ExistingFile);
  prompt->add_option("--responses", o.responses, "Replay file {prompt_hash, response}; adds parsed labels")->check(CLI::ExistingFile);
  prompt->add_flag("--catalog", o.catalog, "Print the caption prompt catalog");
  prompt->add_option("--out", o.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "trapdex: " << e.what() << '\n';
    return 1;
  }

  try {
    if (split->parsed() && o.scheme == "safari" && x_opt->count() == 0)
      throw ValidationError("--scheme safari needs --x");
    if (crop->parsed() && o.dims.empty() && o.truth.empty()) throw ValidationError("crop-plan needs --dims or --truth");

    // ingest writes a store directory and evaluate manages its own outputs.
    Sink sink(evaluate->parsed() || ingest->parsed() ? std::string() : o.out, out);
    if (ingest->parsed()) cmd_ingest(o, *sink, err);
    else if (crop->parsed()) cmd_crop_plan(o, *sink, err);
    else if (search->parsed()) cmd_search(o, *sink, err);
    else if (classify->parsed()) cmd_classify(o, *sink, err);
    else if (evaluate->parsed()) cmd_evaluate(o, *sink, err);
    else if (split->parsed()) cmd_split(o, *sink, err);
    else if (prompt->parsed()) cmd_prompt(o, *sink, err);
    sink.finish();
  } catch (const ValidationError& e) {
    err << "trapdex: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "trapdex: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("trapdex");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace trapdex::cli
