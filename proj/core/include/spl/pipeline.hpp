// End-to-end drivers: pseudo-label generation for a sequence, label files,
// precision/recall evaluation, feature synthesis and the three training
// stages.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spl/boxlabel.hpp"
#include "spl/config.hpp"
#include "spl/ingest.hpp"
#include "spl/proto.hpp"
#include "spl/signals.hpp"
#include "spl/synth.hpp"

namespace spl::pipeline {

// ---- label files ----

// One record per label: {type, class, track_id, box | point, split, velocity, spr}.
void write_label_file(const std::filesystem::path& file, const boxlabel::LabelSet& labels);
boxlabel::LabelSet read_label_file(const std::filesystem::path& file, int frame_id);
// <dir>/<frame:06d>.jsonl for every frame, in frame order.
void write_label_dir(const std::filesystem::path& dir, const std::map<int, boxlabel::LabelSet>& labels);
std::map<int, boxlabel::LabelSet> read_label_dir(const std::filesystem::path& dir);

// Ground-truth boxes of synthetic scenes, written in the label format with
// split "gt".
void write_gt_dir(const std::filesystem::path& dir, const std::vector<std::vector<ingest::GtLabel>>& gt,
                  const std::vector<ingest::FrameBundle>& frames);

// ---- label generation ----

struct LabelGenStats {
  int objects = 0;
  int boxes = 0;
  int points = 0;
  int dropped_tracks = 0;
};

// Annotations (sparse mode) are keyed by frame id; their boxes become the
// supervision and every generated label is pseudo.
std::map<int, boxlabel::LabelSet> generate_labels(const std::vector<ingest::FrameBundle>& frames,
                                                  const LabelGenConfig& cfg,
                                                  const std::map<int, std::vector<boxlabel::BoxLabel>>* annotations = nullptr,
                                                  LabelGenStats* stats = nullptr);

// ---- evaluation ----

struct ClassReport {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double iou_thr = 0.0;
};

struct EvalReport {
  std::array<ClassReport, kNumClasses> per_class;
  ClassReport overall;  // summed counts
  double point_distance = 1.0;
};

// Every predicted label counts regardless of split. Boxes match by BEV IoU
// (greedy, descending), point labels by BEV center distance (greedy,
// ascending) against GT left unmatched by boxes. Throws FrameMismatch when
// the frame sets differ.
EvalReport eval_labels(const std::map<int, boxlabel::LabelSet>& pred, const std::map<int, std::vector<boxlabel::BoxLabel>>& gt,
                       const EvalConfig& cfg);
std::string eval_report_json(const EvalReport& report);

// ---- training data ----

struct SceneObject {
  ObjectClass cls = ObjectClass::Vehicle;
  geom::Box3D box;
  int mode = 0;  // appearance mode within its class
};

struct TrainFrame {
  int frame_id = 0;
  FeatureMap raw;
  Heatmap hg;
  Heatmap hp;
  std::vector<signals::GtCenter> gt_centers;
  // Objects with no supervision label, for mined-recall measurement.
  std::vector<signals::GtCenter> unlabeled;
  std::vector<unsigned char> valid;        // non-null cells
  std::vector<unsigned char> object_cell;  // cell lies on a true object
};

struct TrainData {
  BevGridSpec grid;
  int d_in = 0;
  std::vector<TrainFrame> frames;
};

// Rasterizes per-class appearance modes, background modes, structured
// nuisance and noise over the grid. Cells outside the sensor field of view
// are null.
FeatureMap synth_features(const std::vector<SceneObject>& objects, const BevGridSpec& grid,
                          const FeatureSynthConfig& cfg, Rng& rng, std::vector<unsigned char>* object_cell = nullptr);

// Builds training frames from true scene objects (feature content) and the
// label split (supervision and pseudo heatmaps).
TrainFrame make_train_frame(int frame_id, const std::vector<SceneObject>& scene, const boxlabel::LabelSet& labels,
                            const Config& cfg, Rng& rng);
// gt/<frame>.jsonl plus labels/<frame>.jsonl under `data`. Appearance modes
// are drawn per track.
TrainData load_train_data(const std::filesystem::path& data, const Config& cfg);

struct SeparableSpec {
  int frames = 40;
  int objects_per_frame = 12;
  double labeled_fraction = 0.3;
  int false_pseudo_per_frame = 3;  // pseudo labels on empty background
};

// Random BEV layouts with a labeled subset; the rest carry only pseudo labels.
TrainData make_separable_data(const Config& cfg, const SeparableSpec& spec, std::uint64_t seed);

// ---- training ----

struct TrainState {
  ProjectionHead head;
  std::vector<double> cls_weight;  // D x C
  std::vector<double> cls_bias;
  PrototypeBank bank;
  proto::MemoryBank memory;
  bool prototypes_ready = false;
  long step = 0;
  long total_steps = 0;
  std::vector<double> loss_history;
  Rng rng{0};
};

TrainState init_state(const TrainData& data, const Config& cfg);
// Sets the cosine schedule length for the given stages.
void plan_schedule(TrainState& state, const TrainData& data, const Config& cfg, const std::vector<int>& stages);

void run_stage1(const TrainData& data, TrainState& state, const Config& cfg);
void run_stage2(const TrainData& data, TrainState& state, const Config& cfg);
void run_stage3(const TrainData& data, TrainState& state, const Config& cfg);
void run_stages(const TrainData& data, TrainState& state, const Config& cfg, const std::vector<int>& stages);

struct MiningReport {
  int unlabeled = 0;
  int mined = 0;
  double mined_recall = 0.0;
  long background_hp_cells = 0;
  long background_mined_cells = 0;
  double fp_cell_rate = 0.0;
};

// Stage-3 mining with the current state on every frame, no updates.
MiningReport evaluate_mining(const TrainData& data, const TrainState& state, const Config& cfg);

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state);
void load_checkpoint(const std::filesystem::path& dir, TrainState& state);

}  // namespace spl::pipeline
