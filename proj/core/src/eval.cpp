#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <tuple>

#include "spl/pipeline.hpp"

namespace spl::pipeline {

namespace {

void finalize(ClassReport& r) {
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
}

}  // namespace

EvalReport eval_labels(const std::map<int, boxlabel::LabelSet>& pred,
                       const std::map<int, std::vector<boxlabel::BoxLabel>>& gt, const EvalConfig& cfg) {
  for (const auto& [frame, set] : pred) {
    if (!gt.count(frame)) throw Error(ErrorCode::FrameMismatch, "prediction frame " + std::to_string(frame) + " has no ground truth");
  }
  for (const auto& [frame, boxes] : gt) {
    if (!pred.count(frame)) throw Error(ErrorCode::FrameMismatch, "ground-truth frame " + std::to_string(frame) + " has no prediction file");
  }
  EvalReport report;
  report.point_distance = cfg.point_distance;
  for (int c = 0; c < kNumClasses; ++c) report.per_class[static_cast<std::size_t>(c)].iou_thr = cfg.iou[static_cast<std::size_t>(c)];

  for (const auto& [frame, set] : pred) {
    const auto& truth = gt.at(frame);
    for (ObjectClass cls : kAllClasses) {
      const int ci = class_index(cls);
      auto& r = report.per_class[static_cast<std::size_t>(ci)];
      const double thr = cfg.iou[static_cast<std::size_t>(ci)];

      std::vector<const geom::Box3D*> g;
      for (const auto& b : truth) {
        if (b.cls == cls) g.push_back(&b.box);
      }
      std::vector<const geom::Box3D*> boxes;
      for (const auto* list : {&set.gt_supervision, &set.pseudo_boxes}) {
        for (const auto& b : *list) {
          if (b.cls == cls) boxes.push_back(&b.box);
        }
      }
      std::vector<const geom::Vec3*> points;
      for (const auto& p : set.pseudo_points) {
        if (p.cls == cls) points.push_back(&p.position);
      }

      std::vector<char> g_used(g.size(), 0), b_used(boxes.size(), 0), p_used(points.size(), 0);
      std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double iou = geom::iou_bev(*boxes[i], *g[j]);
          if (iou >= thr) pairs.emplace_back(-iou, i, j);
        }
      }
      std::sort(pairs.begin(), pairs.end());
      for (const auto& [neg, i, j] : pairs) {
        if (b_used[i] || g_used[j]) continue;
        b_used[i] = g_used[j] = 1;
        ++r.tp;
      }
      pairs.clear();
      for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (g_used[j]) continue;
          const double d = std::hypot(points[i]->x - g[j]->cx, points[i]->y - g[j]->cy);
          if (d <= cfg.point_distance) pairs.emplace_back(d, i, j);
        }
      }
      std::sort(pairs.begin(), pairs.end());
      for (const auto& [d, i, j] : pairs) {
        if (p_used[i] || g_used[j]) continue;
        p_used[i] = g_used[j] = 1;
        ++r.tp;
      }
      r.fp += static_cast<int>(std::count(b_used.begin(), b_used.end(), 0) + std::count(p_used.begin(), p_used.end(), 0));
      r.fn += static_cast<int>(std::count(g_used.begin(), g_used.end(), 0));
    }
  }
  for (auto& r : report.per_class) {
    finalize(r);
    report.overall.tp += r.tp;
    report.overall.fp += r.fp;
    report.overall.fn += r.fn;
  }
  finalize(report.overall);
  return report;
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  auto entry = [](const ClassReport& r) {
    nlohmann::ordered_json e;
    e["precision"] = r.precision;
    e["recall"] = r.recall;
    e["tp"] = r.tp;
    e["fp"] = r.fp;
    e["fn"] = r.fn;
    return e;
  };
  for (ObjectClass cls : kAllClasses) {
    auto e = entry(report.per_class[static_cast<std::size_t>(class_index(cls))]);
    e["iou_thr"] = report.per_class[static_cast<std::size_t>(class_index(cls))].iou_thr;
    j["classes"][std::string(class_name(cls))] = e;
  }
  j["overall"] = entry(report.overall);
  j["point_distance"] = report.point_distance;
  return j.dump(2) + "\n";
}

}  // namespace spl::pipeline
