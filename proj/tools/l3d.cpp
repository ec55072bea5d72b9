// l3d: command-line pipeline for synthetic data generation, lifter training,
// lookup-table matching, retargeting, evaluation and clustering.

#include "l3d/dataset_io.hpp"
#include "l3d/evaluation.hpp"
#include "l3d/lookup_io.hpp"
#include "l3d/model_io.hpp"
#include "l3d/retarget.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

namespace {

using namespace l3d;
namespace fs = std::filesystem;

/// Values from --config, overridden by any flag given on the command line.
struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> species;
  std::optional<std::size_t> count;
  std::optional<int> heads;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> k;
  std::optional<std::string> out;
  bool brute_force = false;

  std::string dataset, model, table, input, skeleton;
  std::vector<std::string> models;
  bool binary = false;
  bool self_check = false;
  bool native_coords = false;
};

struct Pipeline {
  Species species = Species::macaque;
  std::uint64_t seed = 0;
  nlohmann::json paths = nlohmann::json::object();
  nlohmann::json gen = nlohmann::json::object();
  nlohmann::json lifter = nlohmann::json::object();
  nlohmann::json cluster = nlohmann::json::object();
};

Pipeline load_pipeline(const Options& o) {
  Pipeline p;
  if (!o.config_path.empty()) {
    const auto j = detail::parse_json(detail::read_file(o.config_path), o.config_path);
    try {
      if (j.contains("species")) p.species = species_from_string(j["species"].get<std::string>());
      if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
      p.paths = j.value("paths", nlohmann::json::object());
      p.gen = j.value("gen", nlohmann::json::object());
      p.lifter = j.value("lifter", nlohmann::json::object());
      p.cluster = j.value("cluster", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(o.config_path + ": " + e.what());
    }
  }
  if (o.species) p.species = species_from_string(*o.species);
  if (o.seed) p.seed = *o.seed;
  return p;
}

std::string path_arg(const Pipeline& p, const std::string& flag, const char* key, const std::string& fallback = {}) {
  if (!flag.empty()) return flag;
  if (p.paths.contains(key)) return p.paths[key].get<std::string>();
  if (!fallback.empty()) return fallback;
  throw ContractError(std::string("missing path '") + key + "' (pass --" + key + " or set paths." + key +
                      " in the config)");
}

std::string out_path(const Options& o, const Pipeline& p, const std::string& fallback) {
  if (o.out) return *o.out;
  if (p.paths.contains("out")) return p.paths["out"].get<std::string>();
  return fallback;
}

Skeleton load_skeleton(const Options& o, const Pipeline& p) {
  const std::string path = !o.skeleton.empty() ? o.skeleton : p.paths.value("skeleton", std::string());
  if (path.empty()) return species_skeleton(p.species);
  return skeleton_from_string(detail::read_file(path));
}

std::string with_suffix(const std::string& base, const char* suffix) { return base + suffix; }

/// Dataset records plus the manifest, when one sits next to the file.
std::vector<DatasetRecord> load_dataset(const std::string& path, std::optional<DatasetManifest>* manifest = nullptr) {
  if (fs::exists(manifest_path(path))) {
    auto m = read_manifest(path);
    if (manifest) *manifest = m;
  } else {
    spdlog::warn("no manifest next to {}; skipping version check", path);
  }
  auto data = read_dataset(path);
  require(!data.empty(), "dataset '" + path + "' is empty");
  return data;
}

int cmd_gen(const Options& o) {
  const auto p = load_pipeline(o);
  const auto sk = load_skeleton(o, p);
  GenConfig cfg = gen_config_from_json(p.gen, GenConfig::defaults_for(p.species));
  cfg.seed = p.seed;
  if (o.count) cfg.target_count = *o.count;
  const auto out = out_path(o, p, std::string(to_string(p.species)) + "_dataset.jsonl");

  const auto actions = species_action_library(p.species, sk);
  const auto data = generate(cfg, sk, actions, [](const std::string& w) { spdlog::warn("{}", w); });
  write_dataset(out, data);
  write_manifest(out, {kDatasetFormatVersion, p.species, cfg, hex64(sk.hash()), data.size()});
  detail::write_file(with_suffix(out, ".variance.csv"), variance_csv(variance_report(data)));
  spdlog::info("wrote {} records to {}", data.size(), out);
  return 0;
}

int cmd_train(const Options& o) {
  const auto p = load_pipeline(o);
  const auto dataset = path_arg(p, o.dataset, "dataset");
  std::optional<DatasetManifest> manifest;
  const auto data = load_dataset(dataset, &manifest);
  const Species species = manifest ? manifest->species : p.species;
  const auto sk = manifest && manifest->species != Species::custom && o.skeleton.empty() &&
                          !p.paths.contains("skeleton")
                      ? species_skeleton(species)
                      : load_skeleton(o, p);

  LifterConfig cfg = lifter_config_from_json(p.lifter);
  cfg.k_s = sk.soft_size();
  cfg.seed = p.seed;
  if (o.heads) cfg.heads = *o.heads;
  if (o.epochs) cfg.epochs = *o.epochs;
  cfg.validate();
  const auto out = out_path(o, p, "lifter_h" + std::to_string(cfg.heads) + ".l3dm");

  spdlog::info("training H={} on {} records for {} epochs", cfg.heads, data.size(), cfg.epochs);
  const auto res = train(make_lift_data(data, sk.soft_subset()), cfg, [&](const EpochProgress& e) {
    if ((e.epoch + 1) % 10 == 0 || e.epoch == 0)
      spdlog::info("epoch {:4d}  train {:.6f}  val {:.6f}", e.epoch + 1, e.train_mse, e.val_mse);
  });
  const auto& r = res.report;
  const nlohmann::json meta = {{"species", std::string(to_string(species))},
                               {"skeleton_hash", hex64(sk.hash())},
                               {"dataset_checksum", hex64(fnv1a64(detail::read_file(dataset)))},
                               {"best_epoch", r.best_epoch + 1},
                               {"val_mse", r.final_val_mse},
                               {"pdj@0.2", r.final_pdj_02},
                               {"pdj@0.05", r.final_pdj_005}};
  save_model(out, res.model, meta);
  detail::write_file(with_suffix(out, ".epochs.csv"), train_report_csv(r));
  spdlog::info("best epoch {}: val MSE {:.6f}, PDJ@0.2 {:.3f}, PDJ@0.05 {:.3f}", r.best_epoch + 1, r.final_val_mse,
               r.final_pdj_02, r.final_pdj_005);
  spdlog::info("wall-clock {:.1f} s", r.wall_seconds);
  return 0;
}

/// Input rows: {"id": ..., "keypoints": [[u, v], ...], "image_size": [w, h]}.
/// Keypoints use the usual image convention (origin top-left, v down) unless
/// --native-coords is given. The generator's camera has both image axes
/// reversed relative to that, so both coordinates are negated before
/// normalization.
int cmd_lift(const Options& o) {
  const auto p = load_pipeline(o);
  const auto loaded = load_model(path_arg(p, o.model, "model"));
  const auto& model = loaded.model;
  const auto input = path_arg(p, o.input, "input");
  const auto out = out_path(o, p, "lifted.jsonl");

  auto in = detail::open_in(input);
  std::string text, line;
  std::size_t lineno = 0, written = 0, skipped = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = detail::parse_json(line, input + ":" + std::to_string(lineno));
    nlohmann::json id;
    Points2 raw;
    try {
      id = j.at("id");
      raw = detail::rows_from_json<Points2>(j.at("keypoints"), 2, "keypoints");
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(input + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (static_cast<std::size_t>(raw.rows()) != model.config.k_s)
      throw ContractError("record " + id.dump() + " has " + std::to_string(raw.rows()) + " keypoints, model expects " +
                          std::to_string(model.config.k_s));
    require(raw.allFinite(), "record " + id.dump() + " has non-finite keypoints");
    if (!o.native_coords) raw = -raw;
    Points2 norm;
    try {
      norm = normalize2d(raw);
    } catch (const DegenerateExtentError&) {
      spdlog::warn("record {} skipped: all keypoints coincide", id.dump());
      ++skipped;
      continue;
    }
    const auto pose = lift(model, norm, [&](const std::string& w) { spdlog::warn("record {}: {}", id.dump(), w); });
    text += nlohmann::json({{"id", id}, {"pose", detail::rows_to_json(pose)}}).dump();
    text += '\n';
    ++written;
  }
  detail::write_file(out, text);
  spdlog::info("lifted {} records ({} skipped) to {}", written, skipped, out);
  return 0;
}

int cmd_lookup_build(const Options& o) {
  const auto p = load_pipeline(o);
  const auto dataset = path_arg(p, o.dataset, "dataset");
  std::optional<DatasetManifest> manifest;
  const auto data = load_dataset(dataset, &manifest);
  const auto sk = manifest && manifest->species != Species::custom && o.skeleton.empty() &&
                          !p.paths.contains("skeleton")
                      ? species_skeleton(manifest->species)
                      : load_skeleton(o, p);
  const auto table = build_table(data, sk.soft_subset());
  const auto out = out_path(o, p, o.binary ? "lookup.l3dt" : "lookup.jsonl");
  save_table(out, table, o.binary ? TableEncoding::binary : TableEncoding::jsonl);
  spdlog::info("wrote lookup table with {} entries to {}", table.size(), out);
  return 0;
}

int cmd_retarget(const Options& o) {
  const auto p = load_pipeline(o);
  const auto table = load_table(path_arg(p, o.table, "table"));
  const auto sk = load_skeleton(o, p);
  const auto mode = o.brute_force ? QueryMode::brute_force : QueryMode::indexed;
  const auto out = out_path(o, p, "retarget.jsonl");

  std::string text;
  double worst = 0.0, sum = 0.0;
  std::size_t n = 0;
  auto emit = [&](const nlohmann::json& id, const RetargetResult& r) {
    auto j = retarget_to_json(sk, r);
    j["id"] = id;
    text += j.dump();
    text += '\n';
    worst = std::max(worst, r.residual_max());
    sum += r.residual_mean();
    ++n;
  };

  if (o.self_check) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      auto r = retarget(sk, table.soft_rows(i), table, mode);
      require(r.match.distance == 0.0, "self query of entry " + std::to_string(i) + " did not match exactly");
      emit(nlohmann::json(table.entry(i).record_id), r);
    }
  } else {
    const auto input = path_arg(p, o.input, "input");
    auto in = detail::open_in(input);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto j = detail::parse_json(line, input + ":" + std::to_string(lineno));
      Points3 pose;
      try {
        pose = detail::rows_from_json<Points3>(j.at("pose"), 3, "pose");
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(input + ":" + std::to_string(lineno) + ": " + e.what());
      }
      emit(j.value("id", nlohmann::json(lineno)), retarget(sk, pose, table, mode));
    }
  }
  detail::write_file(out, text);
  const nlohmann::json summary = {{"poses", n}, {"residual_mean", n ? sum / static_cast<double>(n) : 0.0},
                                  {"residual_max", worst}};
  detail::write_file(with_suffix(out, ".summary.json"), summary.dump(2) + "\n");
  spdlog::info("retargeted {} poses to {}; residual mean {:.3g}, max {:.3g}", n, out,
               n ? sum / static_cast<double>(n) : 0.0, worst);
  return 0;
}

int cmd_eval(const Options& o) {
  const auto p = load_pipeline(o);
  const auto dataset = path_arg(p, o.dataset, "dataset");
  std::optional<DatasetManifest> manifest;
  const auto data = load_dataset(dataset, &manifest);
  std::vector<std::string> paths = o.models;
  if (paths.empty() && p.paths.contains("models")) paths = p.paths["models"].get<std::vector<std::string>>();
  require(!paths.empty(), "eval needs at least one --model");

  std::vector<Variant> variants;
  for (const auto& mp : paths) {
    auto m = load_model(mp).model;
    const std::string name = m.config.heads == 0 ? "w/o Att." : "H=" + std::to_string(m.config.heads);
    variants.push_back({name, std::move(m)});
  }
  const auto species = manifest ? manifest->species : p.species;
  const auto sk = o.skeleton.empty() && !p.paths.contains("skeleton") && species != Species::custom
                      ? species_skeleton(species)
                      : load_skeleton(o, p);
  // Without an explicit seed, evaluate on the split the first model was trained with.
  const std::uint64_t split_seed = o.seed || !o.config_path.empty() ? p.seed : variants.front().model.config.seed;
  const auto rep = evaluate(variants, make_lift_data(data, sk.soft_subset()), split_seed,
                            fs::path(dataset).filename().string());
  const auto out = out_path(o, p, "eval.csv");
  detail::write_file(out, eval_csv(rep));
  detail::write_file(with_suffix(out, ".txt"), eval_text(rep));
  std::cout << eval_text(rep);
  return 0;
}

int cmd_cluster(const Options& o) {
  const auto p = load_pipeline(o);
  const auto table = load_table(path_arg(p, o.table, "table"));
  KMeansOptions opt;
  opt.seed = p.seed;
  if (p.cluster.contains("k")) opt.k = p.cluster["k"].get<std::size_t>();
  if (p.cluster.contains("restarts")) opt.restarts = p.cluster["restarts"].get<std::size_t>();
  if (o.k) opt.k = *o.k;
  const auto rep = cluster_table(table, opt);
  const auto out = out_path(o, p, "clusters.csv");
  detail::write_file(out, cluster_assignments_csv(table, rep));
  detail::write_file(with_suffix(out, ".summary.csv"), cluster_summary_csv(rep));
  std::size_t pure = 0;
  for (const auto& c : rep.clusters) pure += c.purity >= 0.6;
  spdlog::info("k={}: {} of {} clusters have purity >= 0.6 (inertia {:.4f})", rep.k, pure, rep.k, rep.inertia);
  return 0;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("l3d");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("L3D_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Synthetic-data 2D-to-3D pose lifting for quadrupeds"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON pipeline config; flags override its values")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "global seed");
    sub->add_option("--species", o.species, "macaque or horse");
    sub->add_option("--out", o.out, "output path");
    sub->add_option("--skeleton", o.skeleton, "skeleton JSON (defaults to the species rig)");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  common(gen);
  gen->add_option("--count", o.count, "number of records (default: species size)");

  auto* tr = app.add_subcommand("train", "train a lifter");
  common(tr);
  tr->add_option("--dataset", o.dataset, "dataset JSONL");
  tr->add_option("--heads", o.heads, "attention heads: 0, 2 or 4");
  tr->add_option("--epochs", o.epochs, "training epochs");

  auto* lf = app.add_subcommand("lift", "lift 2D keypoints to soft 3D poses");
  common(lf);
  lf->add_option("--model", o.model, "model file");
  lf->add_option("--input", o.input, "keypoint JSONL");
  lf->add_flag("--native-coords", o.native_coords, "keypoints already use the generator's image convention");

  auto* lb = app.add_subcommand("lookup-build", "build a deep-pose lookup table");
  common(lb);
  lb->add_option("--dataset", o.dataset, "dataset JSONL");
  lb->add_flag("--binary", o.binary, "write the packed binary encoding");

  auto* rt = app.add_subcommand("retarget", "match lifted poses to the table and solve joint rotations");
  common(rt);
  rt->add_option("--table", o.table, "lookup table file");
  rt->add_option("--input", o.input, "lifted poses JSONL");
  rt->add_flag("--brute-force", o.brute_force, "exhaustive scan instead of the k-d tree");
  rt->add_flag("--self", o.self_check, "retarget every table entry's own soft rows");

  auto* ev = app.add_subcommand("eval", "compare lifter variants on the validation split");
  common(ev);
  ev->add_option("--dataset", o.dataset, "dataset JSONL");
  ev->add_option("--model", o.models, "model file (repeatable)");

  auto* cl = app.add_subcommand("cluster", "k-means + PCA over the lookup table");
  common(cl);
  cl->add_option("--table", o.table, "lookup table file");
  cl->add_option("--k", o.k, "cluster count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*tr) return cmd_train(o);
    if (*lf) return cmd_lift(o);
    if (*lb) return cmd_lookup_build(o);
    if (*rt) return cmd_retarget(o);
    if (*ev) return cmd_eval(o);
    if (*cl) return cmd_cluster(o);
  } catch (const Error& e) {
    std::cerr << "error: kind=" << e.kind() << " message=\"" << escape(e.what()) << "\"\n";
    return e.kind() == "contract" ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=\"" << escape(e.what()) << "\"\n";
    return 1;
  }
  return 1;
}
