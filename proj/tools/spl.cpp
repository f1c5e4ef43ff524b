#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "spl/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace spl;

namespace {

Config config_or_default(const std::string& path) { return path.empty() ? default_config() : load_config(path); }

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
  out << text;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw Error(ErrorCode::InvalidArgument, "bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::map<int, std::vector<boxlabel::BoxLabel>> boxes_of(const std::map<int, boxlabel::LabelSet>& sets) {
  std::map<int, std::vector<boxlabel::BoxLabel>> out;
  for (const auto& [frame, set] : sets) {
    auto& v = out[frame];
    v = set.gt_supervision;
    v.insert(v.end(), set.pseudo_boxes.begin(), set.pseudo_boxes.end());
  }
  return out;
}

json mining_json(const pipeline::MiningReport& m) {
  json j;
  j["unlabeled"] = m.unlabeled;
  j["mined"] = m.mined;
  j["mined_recall"] = m.mined_recall;
  j["background_hp_cells"] = m.background_hp_cells;
  j["background_mined_cells"] = m.background_mined_cells;
  j["fp_cell_rate"] = m.fp_cell_rate;
  return j;
}

int cmd_synth(const std::string& spec_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  auto spec = spec_path.empty() ? ingest::standard_benchmark_spec()
                                : ingest::scene_spec_from_toml(toml::parse_file(spec_path));
  if (seed) spec.seed = *seed;
  const auto scene = ingest::synth_scene(spec);
  ingest::write_sequence(out, scene.frames);
  pipeline::write_gt_dir(out / "gt", scene.gt, scene.frames);
  std::size_t labels = 0;
  for (const auto& g : scene.gt) labels += g.size();
  std::cout << json{{"frames", scene.frames.size()}, {"gt_labels", labels}}.dump() << "\n";
  return 0;
}

int cmd_gen_labels(const fs::path& data, const std::string& config, const fs::path& out) {
  const Config cfg = config_or_default(config);
  const auto frames = ingest::load_sequence(data);
  std::map<int, std::vector<boxlabel::BoxLabel>> ann;
  const bool sparse = cfg.train.mode == TrainMode::Sparse;
  if (sparse) ann = boxes_of(pipeline::read_label_dir(data / "annotations"));
  pipeline::LabelGenStats stats;
  const auto labels = pipeline::generate_labels(frames, cfg.labels, sparse ? &ann : nullptr, &stats);
  pipeline::write_label_dir(out, labels);
  std::cout << json{{"frames", labels.size()},
                    {"objects", stats.objects},
                    {"boxes", stats.boxes},
                    {"points", stats.points},
                    {"dropped_tracks", stats.dropped_tracks}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_eval(const fs::path& pred, const fs::path& gt, const std::string& iou, const std::string& config,
             const std::string& report) {
  Config cfg = config_or_default(config);
  if (!iou.empty()) {
    const auto v = parse_list(iou);
    if (v.size() != kNumClasses) throw Error(ErrorCode::InvalidArgument, "--iou needs one threshold per class");
    for (int c = 0; c < kNumClasses; ++c) cfg.eval.iou[static_cast<std::size_t>(c)] = v[static_cast<std::size_t>(c)];
  }
  const auto rep = pipeline::eval_labels(pipeline::read_label_dir(pred), boxes_of(pipeline::read_label_dir(gt)), cfg.eval);
  const std::string text = pipeline::eval_report_json(rep);
  if (!report.empty()) write_text(report, text + "\n");
  std::cout << text << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& stages_arg, const fs::path& ckpt) {
  const Config cfg = config_or_default(config);
  std::vector<int> stages;
  for (double s : parse_list(stages_arg)) stages.push_back(static_cast<int>(s));
  // Without --data the run uses the separable synthetic feature set.
  const auto td = data.empty() ? pipeline::make_separable_data(cfg, {}, cfg.train.seed)
                               : pipeline::load_train_data(data, cfg);
  auto state = pipeline::init_state(td, cfg);
  pipeline::run_stages(td, state, cfg, stages);
  pipeline::save_checkpoint(ckpt, state);
  write_text(ckpt / "config.toml", config_to_toml(cfg));
  const json mining = mining_json(pipeline::evaluate_mining(td, state, cfg));
  write_text(ckpt / "mining.json", mining.dump() + "\n");
  std::cout << json{{"steps", state.step}, {"final_loss", state.loss_history.empty() ? 0.0 : state.loss_history.back()},
                    {"mining", mining}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_inspect(const fs::path& ckpt) {
  const fs::path file = fs::is_directory(ckpt) ? ckpt / "prototypes.bin" : ckpt;
  proto::MemoryBank memory;
  const auto bank = proto::load_prototypes(file, &memory);
  json j;
  j["C"] = bank.C;
  j["K"] = bank.K;
  j["D"] = bank.D;
  json norms = json::array();
  for (int c = 0; c < bank.C; ++c) {
    json row = json::array();
    for (int k = 0; k < bank.K; ++k) row.push_back(l2norm(bank.at(c, k)));
    norms.push_back(row);
  }
  j["norms"] = norms;
  // Rows and columns run over (class, prototype) in class-major order.
  json cos = json::array();
  for (int a = 0; a < bank.C * bank.K; ++a) {
    json row = json::array();
    for (int b = 0; b < bank.C * bank.K; ++b) {
      const auto pa = bank.at(a / bank.K, a % bank.K), pb = bank.at(b / bank.K, b % bank.K);
      const double n = l2norm(pa) * l2norm(pb);
      row.push_back(n > 0.0 ? dot(pa, pb) / n : 0.0);
    }
    cos.push_back(row);
  }
  j["cosines"] = cos;
  json mem = json::array();
  for (int c = 0; c < memory.num_classes(); ++c) mem.push_back(memory.size(c));
  j["memory"] = mem;
  std::cout << j.dump(1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spl: pseudo labels and prototype training on LiDAR sequences"};
  app.require_subcommand(1);

  std::string spec, out, data, config, pred, gt, iou, report, stages = "1,2,3", ckpt;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  auto* synth = app.add_subcommand("synth", "Render a synthetic sequence with ground truth");
  synth->add_option("--spec", spec, "Scene TOML (standard benchmark when omitted)");
  synth->add_option("--out", out, "Output dataset directory")->required();
  seed_opt = synth->add_option("--seed", seed, "Scene seed (overrides the spec)");

  auto* gen = app.add_subcommand("gen-labels", "Generate per-frame pseudo labels");
  gen->add_option("--data", data, "Dataset directory")->required();
  gen->add_option("--config", config, "Config TOML");
  gen->add_option("--out", out, "Label directory")->required();

  auto* ev = app.add_subcommand("eval-labels", "Precision and recall of labels against ground truth");
  ev->add_option("--pred", pred, "Predicted label directory")->required();
  ev->add_option("--gt", gt, "Ground-truth label directory")->required();
  ev->add_option("--iou", iou, "BEV IoU per class, e.g. 0.5,0.25,0.25");
  ev->add_option("--config", config, "Config TOML");
  ev->add_option("--report", report, "JSON report file");

  auto* train = app.add_subcommand("train", "Run training stages and write a checkpoint");
  train->add_option("--data", data, "Dataset with gt/ and labels/ (separable synthetic features when omitted)");
  train->add_option("--config", config, "Config TOML");
  train->add_option("--stages", stages, "Comma-separated stages")->capture_default_str();
  train->add_option("--ckpt", ckpt, "Checkpoint directory")->required();

  auto* inspect = app.add_subcommand("inspect", "Prototype norms and pairwise cosines");
  inspect->add_option("--ckpt", ckpt, "prototypes.bin or checkpoint directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(spec, out, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    if (*gen) return cmd_gen_labels(data, config, out);
    if (*ev) return cmd_eval(pred, gt, iou, config, report);
    if (*train) return cmd_train(data, config, stages, ckpt);
    if (*inspect) return cmd_inspect(ckpt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
