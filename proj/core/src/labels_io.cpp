#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "spl/pipeline.hpp"
#include "text_util.hpp"

namespace spl::pipeline {

using json = nlohmann::json;

namespace {

json box_record(const boxlabel::BoxLabel& b, std::string_view split) {
  json j;
  j["type"] = "box";
  j["class"] = class_index(b.cls);
  j["track_id"] = b.track_id;
  j["box"] = {b.box.cx, b.box.cy, b.box.cz, b.box.l, b.box.w, b.box.h, b.box.yaw};
  j["split"] = split;
  j["velocity"] = b.velocity ? json::array({b.velocity->x, b.velocity->y, b.velocity->z}) : json(nullptr);
  j["spr"] = b.spr ? json(*b.spr) : json(nullptr);
  return j;
}

json point_record(const pointlabel::PointLabel& p) {
  json j;
  j["type"] = "point";
  j["class"] = class_index(p.cls);
  j["track_id"] = p.track_id;
  j["point"] = {p.position.x, p.position.y, p.position.z};
  j["split"] = "pseudo";
  j["velocity"] = nullptr;
  j["spr"] = nullptr;
  return j;
}

ObjectClass parse_class(const json& j) {
  if (j.is_number_integer()) {
    if (auto c = class_from_index(j.get<int>())) return *c;
  } else if (j.is_string()) {
    if (auto c = class_from_name(j.get<std::string>())) return *c;
  }
  throw std::invalid_argument("unknown class");
}

std::vector<double> numbers(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n) throw std::invalid_argument(std::string(what) + " must have " + std::to_string(n) + " numbers");
  std::vector<double> v;
  for (const auto& e : j) v.push_back(e.get<double>());
  return v;
}

}  // namespace

void write_label_file(const std::filesystem::path& file, const boxlabel::LabelSet& labels) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
  for (const auto& b : labels.gt_supervision) out << box_record(b, "gt").dump() << "\n";
  for (const auto& b : labels.pseudo_boxes) out << box_record(b, "pseudo").dump() << "\n";
  for (const auto& p : labels.pseudo_points) out << point_record(p).dump() << "\n";
}

boxlabel::LabelSet read_label_file(const std::filesystem::path& file, int frame_id) {
  const auto lines = detail::read_lines(file.string());
  boxlabel::LabelSet set;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(lines[n]);
      const std::string type = j.at("type").get<std::string>();
      const std::string split = j.value("split", std::string("pseudo"));
      if (split != "gt" && split != "pseudo") throw std::invalid_argument("split must be gt or pseudo");
      if (type == "box") {
        boxlabel::BoxLabel b;
        b.cls = parse_class(j.at("class"));
        b.track_id = j.value("track_id", 0);
        b.frame_id = frame_id;
        const auto v = numbers(j.at("box"), 7, "box");
        b.box = {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
        if (!b.box.is_valid()) throw std::invalid_argument("box dimensions must be positive");
        if (j.contains("velocity") && !j["velocity"].is_null()) {
          const auto vel = numbers(j["velocity"], 3, "velocity");
          b.velocity = geom::Vec3{vel[0], vel[1], vel[2]};
        }
        if (j.contains("spr") && !j["spr"].is_null()) b.spr = j["spr"].get<double>();
        (split == "gt" ? set.gt_supervision : set.pseudo_boxes).push_back(b);
      } else if (type == "point") {
        pointlabel::PointLabel p;
        p.cls = parse_class(j.at("class"));
        p.track_id = j.value("track_id", 0);
        p.frame_id = frame_id;
        const auto v = numbers(j.at("point"), 3, "point");
        p.position = {v[0], v[1], v[2]};
        set.pseudo_points.push_back(p);
      } else {
        throw std::invalid_argument("type must be box or point");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      detail::malformed(file.string(), n + 1, e.what());
    }
  }
  return set;
}

void write_label_dir(const std::filesystem::path& dir, const std::map<int, boxlabel::LabelSet>& labels) {
  std::filesystem::create_directories(dir);
  for (const auto& [frame, set] : labels) write_label_file(dir / detail::frame_name(frame, ".jsonl"), set);
}

std::map<int, boxlabel::LabelSet> read_label_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::MissingFile, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<int, boxlabel::LabelSet> out;
  for (const auto& f : files) {
    long long id = 0;
    if (!detail::parse_int(f.stem().string(), id)) {
      throw Error(ErrorCode::MalformedRecord, f.string() + ": file name is not a frame id");
    }
    out[static_cast<int>(id)] = read_label_file(f, static_cast<int>(id));
  }
  return out;
}

void write_gt_dir(const std::filesystem::path& dir, const std::vector<std::vector<ingest::GtLabel>>& gt,
                  const std::vector<ingest::FrameBundle>& frames) {
  std::map<int, boxlabel::LabelSet> sets;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto& set = sets[frames[i].frame_id];
    if (i >= gt.size()) continue;
    for (const auto& g : gt[i]) {
      boxlabel::BoxLabel b;
      b.box = g.box;
      b.cls = g.cls;
      b.track_id = g.track_id;
      b.frame_id = g.frame_id;
      set.gt_supervision.push_back(b);
    }
  }
  write_label_dir(dir, sets);
}

}  // namespace spl::pipeline
