#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "spl/ingest.hpp"
#include "text_util.hpp"

namespace spl::ingest {

namespace fs = std::filesystem;
using json = nlohmann::json;
using detail::malformed;

static_assert(std::endian::native == std::endian::little, "point files are read as native little-endian floats");

std::vector<float> read_points_bin(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, file.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % (4 * sizeof(float)) != 0) {
    throw Error(ErrorCode::MalformedRecord, file.string() + ": size is not a multiple of 16 bytes");
  }
  std::vector<float> data(bytes / sizeof(float));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  return data;
}

void write_points_bin(const fs::path& file, const geom::PointCloud& cloud) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
  std::vector<float> data;
  data.reserve(cloud.size() * 4);
  for (const auto& p : cloud.points) {
    data.push_back(static_cast<float>(p.x));
    data.push_back(static_cast<float>(p.y));
    data.push_back(static_cast<float>(p.z));
    data.push_back(static_cast<float>(p.intensity));
  }
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
}

geom::CameraModel read_calib(const fs::path& file) {
  const auto lines = detail::read_lines(file.string());
  std::map<std::string, std::vector<double>> kv;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto tok = detail::split_ws(lines[i]);
    if (tok.empty() || tok[0].front() == '#') continue;
    std::string key(tok[0]);
    if (key.back() == ':') key.pop_back();
    std::vector<double> vals;
    for (std::size_t t = 1; t < tok.size(); ++t) {
      double v = 0;
      if (!detail::parse_double(tok[t], v)) malformed(file.string(), i + 1, "bad number '" + std::string(tok[t]) + "'");
      vals.push_back(v);
    }
    kv[key] = std::move(vals);
  }
  auto scalar = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end() || it->second.size() != 1) {
      throw Error(ErrorCode::CalibrationInvalid, file.string() + ": missing or malformed '" + key + "'");
    }
    return it->second[0];
  };
  geom::CameraModel cam;
  cam.fx = scalar("fx");
  cam.fy = scalar("fy");
  cam.cx = scalar("cx");
  cam.cy = scalar("cy");
  cam.image_w = static_cast<int>(scalar("image_w"));
  cam.image_h = static_cast<int>(scalar("image_h"));
  auto it = kv.find("lidar_to_cam");
  if (it == kv.end() || it->second.size() != 12) {
    throw Error(ErrorCode::CalibrationInvalid, file.string() + ": lidar_to_cam needs 12 values");
  }
  cam.lidar_to_cam = geom::RigidTransform::from_3x4(std::span<const double, 12>(it->second.data(), 12));
  if (!cam.is_valid()) throw Error(ErrorCode::CalibrationInvalid, file.string() + ": invalid camera model");
  return cam;
}

namespace {

Detection2D parse_detection(const json& j, const std::string& file, std::size_t line) {
  Detection2D det;
  try {
    det.frame_id = j.at("frame").get<int>();
    const auto& cls = j.at("class");
    std::optional<ObjectClass> c;
    if (cls.is_string()) c = class_from_name(cls.get<std::string>());
    else c = class_from_index(cls.get<int>());
    if (!c) malformed(file, line, "unknown class");
    det.cls = *c;
    const auto& r = j.at("rect");
    if (!r.is_array() || r.size() != 4) malformed(file, line, "rect must have 4 numbers");
    det.rect = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
    det.track_id = j.at("track_id").get<int>();
    det.score = j.value("score", 1.0);
    const auto& rle = j.at("mask_rle");
    const auto& size = rle.at("size");
    if (!size.is_array() || size.size() != 2) malformed(file, line, "mask_rle.size must be [h, w]");
    const int h = size[0].get<int>(), w = size[1].get<int>();
    det.mask = BinaryMask::decode_rle(w, h, rle.at("counts").get<std::vector<std::uint32_t>>());
  } catch (const json::exception& e) {
    malformed(file, line, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedRecord) malformed(file, line, e.what());
    throw;
  }
  if (!det.rect.is_valid()) malformed(file, line, "rect has x_min > x_max or y_min > y_max");
  if (det.mask.empty()) malformed(file, line, "empty mask");
  if (det.track_id < 0) malformed(file, line, "negative track_id");
  if (det.score < 0.0 || det.score > 1.0) malformed(file, line, "score outside [0, 1]");
  const auto mb = det.mask.bounds();
  if (mb.x_min < det.rect.x_min || mb.y_min < det.rect.y_min || mb.x_max > det.rect.x_max ||
      mb.y_max > det.rect.y_max) {
    malformed(file, line, "rect does not contain all mask pixels");
  }
  return det;
}

json detection_to_json(const Detection2D& det) {
  json rle;
  rle["size"] = {det.mask.image_h(), det.mask.image_w()};
  rle["counts"] = det.mask.encode_rle();
  json j;
  j["frame"] = det.frame_id;
  j["class"] = class_index(det.cls);
  j["rect"] = {det.rect.x_min, det.rect.y_min, det.rect.x_max, det.rect.y_max};
  j["mask_rle"] = std::move(rle);
  j["track_id"] = det.track_id;
  j["score"] = det.score;
  return j;
}

}  // namespace

std::vector<FrameBundle> load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, dir.string() + " is not a directory");
  const auto calib = read_calib(dir / "calib.txt");

  const std::string poses_file = (dir / "poses.txt").string();
  const auto pose_lines = detail::read_lines(poses_file);
  std::vector<FrameBundle> frames;
  for (std::size_t i = 0; i < pose_lines.size(); ++i) {
    auto tok = detail::split_ws(pose_lines[i]);
    if (tok.empty()) continue;
    if (tok.size() != 13) malformed(poses_file, i + 1, "expected frame_id and 12 floats");
    long long id = 0;
    if (!detail::parse_int(tok[0], id) || id < 0) malformed(poses_file, i + 1, "bad frame id");
    std::array<double, 12> m{};
    for (std::size_t k = 0; k < 12; ++k) {
      if (!detail::parse_double(tok[k + 1], m[k])) malformed(poses_file, i + 1, "bad pose value");
    }
    FrameBundle fb;
    fb.frame_id = static_cast<int>(id);
    fb.pose = geom::RigidTransform::from_3x4(m);
    if (!fb.pose.is_valid(1e-5)) malformed(poses_file, i + 1, "pose rotation is not orthonormal");
    fb.camera = calib;
    frames.push_back(std::move(fb));
  }

  const std::string ts_file = (dir / "timestamps.txt").string();
  const auto ts_lines = detail::read_lines(ts_file);
  std::size_t k = 0;
  for (std::size_t i = 0; i < ts_lines.size(); ++i) {
    auto tok = detail::split_ws(ts_lines[i]);
    if (tok.empty()) continue;
    if (k >= frames.size()) malformed(ts_file, i + 1, "more timestamps than poses");
    if (tok.size() != 1 || !detail::parse_double(tok[0], frames[k].timestamp)) {
      malformed(ts_file, i + 1, "expected one float");
    }
    if (k > 0 && frames[k].timestamp <= frames[k - 1].timestamp) {
      malformed(ts_file, i + 1, "timestamps must be strictly increasing");
    }
    ++k;
  }
  if (k != frames.size()) malformed(ts_file, ts_lines.size(), "fewer timestamps than poses");

  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!by_id.emplace(frames[i].frame_id, i).second) {
      throw Error(ErrorCode::MalformedRecord, poses_file + ": duplicate frame id " + std::to_string(frames[i].frame_id));
    }
    const auto data = read_points_bin(dir / "points" / detail::frame_name(frames[i].frame_id, ".bin"));
    auto& cloud = frames[i].cloud;
    cloud.frame_id = frames[i].frame_id;
    cloud.points.reserve(data.size() / 4);
    for (std::size_t p = 0; p + 3 < data.size(); p += 4) {
      cloud.points.push_back({data[p], data[p + 1], data[p + 2], data[p + 3]});
    }
  }

  const std::string det_file = (dir / "detections.jsonl").string();
  const auto det_lines = detail::read_lines(det_file);
  for (std::size_t i = 0; i < det_lines.size(); ++i) {
    if (detail::split_ws(det_lines[i]).empty()) continue;
    json j;
    try {
      j = json::parse(det_lines[i]);
    } catch (const json::exception& e) {
      malformed(det_file, i + 1, e.what());
    }
    auto det = parse_detection(j, det_file, i + 1);
    auto it = by_id.find(det.frame_id);
    if (it == by_id.end()) malformed(det_file, i + 1, "unknown frame " + std::to_string(det.frame_id));
    if (det.mask.image_w() != calib.image_w || det.mask.image_h() != calib.image_h) {
      malformed(det_file, i + 1, "mask size differs from calibration image size");
    }
    frames[it->second].detections.push_back(std::move(det));
  }
  return frames;
}

void write_sequence(const fs::path& dir, const std::vector<FrameBundle>& frames) {
  fs::create_directories(dir / "points");
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "no frames to write");
  const auto& cam = frames.front().camera;
  {
    std::ofstream out(dir / "calib.txt");
    out << "fx " << detail::format_double(cam.fx) << "\n";
    out << "fy " << detail::format_double(cam.fy) << "\n";
    out << "cx " << detail::format_double(cam.cx) << "\n";
    out << "cy " << detail::format_double(cam.cy) << "\n";
    out << "image_w " << cam.image_w << "\n";
    out << "image_h " << cam.image_h << "\n";
    out << "lidar_to_cam";
    for (double v : cam.lidar_to_cam.to_3x4()) out << ' ' << detail::format_double(v);
    out << "\n";
  }
  std::ofstream poses(dir / "poses.txt");
  std::ofstream stamps(dir / "timestamps.txt");
  std::ofstream dets(dir / "detections.jsonl");
  for (const auto& f : frames) {
    poses << f.frame_id;
    for (double v : f.pose.to_3x4()) poses << ' ' << detail::format_double(v);
    poses << "\n";
    stamps << detail::format_double(f.timestamp) << "\n";
    write_points_bin(dir / "points" / detail::frame_name(f.frame_id, ".bin"), f.cloud);
    for (const auto& d : f.detections) dets << detection_to_json(d).dump() << "\n";
  }
}

}  // namespace spl::ingest
