#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "audiogram/detection.hpp"
#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/grid.hpp"

namespace audiogram {

using Json = nlohmann::json;

namespace json_io {

inline Json read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline void write_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

inline Json box(const Box& b) { return Json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

inline Box box(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw SchemaError(where + ": bbox must be [x_min, y_min, x_max, y_max]");
  Box b{number(j[0], where), number(j[1], where), number(j[2], where), number(j[3], where)};
  if (!b.valid()) throw SchemaError(where + ": bbox must satisfy x_min < x_max and y_min < y_max");
  return b;
}

inline Json points(const std::vector<Point>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

inline std::vector<Point> points(const Json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected a list of [x, y]");
  std::vector<Point> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& p = j[i];
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (!p.is_array() || p.size() != 2) throw SchemaError(w + ": expected [x, y]");
    out.push_back({number(p[0], w), number(p[1], w)});
  }
  return out;
}

inline Json detection(const Detection& d) {
  return {{"class", d.cls.name()}, {"bbox", box(d.bbox)}, {"score", d.score}};
}

inline Detection detection(const Json& j, std::size_t record) {
  const std::string where = "detection record " + std::to_string(record);
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  if (!j.contains("class") || !j["class"].is_string())
    throw SchemaError(where + ": missing string field 'class'");
  const auto name = j["class"].get<std::string>();
  const auto cls = MarkClass::from_name(name);
  if (!cls) throw SchemaError(where + ": unknown class '" + name + "'");
  if (!j.contains("bbox")) throw SchemaError(where + ": missing field 'bbox'");
  Detection d{*cls, box(j["bbox"], where), 1.0};
  if (j.contains("score")) d.score = number(j["score"], where);
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw SchemaError(where + ": score must be in [0, 1]");
  return d;
}

inline Json detections(const std::vector<Detection>& ds) {
  Json a = Json::array();
  for (const auto& d : ds) a.push_back(detection(d));
  return a;
}

inline std::vector<Detection> detections(const Json& j) {
  if (!j.is_array()) throw SchemaError("detections: expected a JSON array");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(detection(j[i], i));
  return out;
}

inline Json matrix(const Eigen::Matrix3d& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r) a.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return a;
}

inline Eigen::Matrix3d matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(where + ": expected a 3x3 matrix");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw SchemaError(where + ": expected a 3x3 matrix");
    for (int c = 0; c < 3; ++c) m(r, c) = number(j[r][c], where);
  }
  return m;
}

inline Json homography(const Homography& h) {
  return {{"matrix", matrix(h.matrix())}, {"provenance", std::string(to_string(h.provenance()))}};
}

inline Homography homography(const Json& j) {
  if (j.is_array()) return Homography(matrix(j, "homography"));
  if (!j.is_object() || !j.contains("matrix")) throw SchemaError("homography: expected matrix");
  Provenance p = Provenance::identity;
  if (j.contains("provenance")) p = provenance_from_string(j["provenance"].get<std::string>());
  return Homography(matrix(j["matrix"], "homography"), p);
}

// Level-1 form: [[frequency, hl, ear], ...].
inline Json audiogram_tuples(const DigitalAudiogram& g) {
  Json a = Json::array();
  for (const auto& m : g.marks()) a.push_back({m.frequency, m.hl, std::string(to_string(m.ear))});
  return a;
}

inline DigitalAudiogram audiogram_tuples(const Json& j) {
  if (!j.is_array()) throw SchemaError("level1: expected a list of [frequency, hl, ear]");
  DigitalAudiogram g;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& t = j[i];
    const std::string w = "level1[" + std::to_string(i) + "]";
    if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() || !t[1].is_number_integer() ||
        !t[2].is_string())
      throw SchemaError(w + ": expected [frequency, hl, ear]");
    try {
      g.add({t[0].get<int>(), t[1].get<int>(), ear_from_string(t[2].get<std::string>())});
    } catch (const DomainError& e) {
      throw SchemaError(w + ": " + e.what());
    }
  }
  return g;
}

// Interpretation output form: {"marks": [{"frequency", "hl", "ear"}...]}.
inline Json audiogram_marks(const DigitalAudiogram& g) {
  Json a = Json::array();
  for (const auto& m : g.marks())
    a.push_back({{"frequency", m.frequency}, {"hl", m.hl}, {"ear", std::string(to_string(m.ear))}});
  return a;
}

inline DigitalAudiogram audiogram_marks(const Json& j) {
  if (!j.is_array()) throw SchemaError("marks: expected an array");
  DigitalAudiogram g;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& m = j[i];
    const std::string w = "marks[" + std::to_string(i) + "]";
    if (!m.is_object() || !m.contains("frequency") || !m.contains("hl") || !m.contains("ear"))
      throw SchemaError(w + ": expected {frequency, hl, ear}");
    try {
      g.add({m["frequency"].get<int>(), m["hl"].get<int>(),
             ear_from_string(m["ear"].get<std::string>())});
    } catch (const DomainError& e) {
      throw SchemaError(w + ": " + e.what());
    } catch (const Json::exception& e) {
      throw SchemaError(w + ": " + e.what());
    }
  }
  return g;
}

inline Json bundle(const AnnotationBundle& b) {
  return {{"level1", audiogram_tuples(b.level1)},
          {"level2", box(b.level2)},
          {"level3", points(b.level3)},
          {"level4", detections(b.level4)},
          {"homography", matrix(b.true_homography.matrix())},
          {"homography_provenance", std::string(to_string(b.true_homography.provenance()))}};
}

inline AnnotationBundle bundle(const Json& j) {
  if (!j.is_object()) throw SchemaError("annotation: expected an object");
  for (const char* key : {"level1", "level2", "level3", "level4", "homography"})
    if (!j.contains(key)) throw SchemaError(std::string("annotation: missing '") + key + "'");
  AnnotationBundle b;
  b.level1 = audiogram_tuples(j["level1"]);
  b.level2 = box(j["level2"], "level2");
  b.level3 = points(j["level3"], "level3");
  b.level4 = detections(j["level4"]);
  Provenance p = Provenance::ground_truth;
  if (j.contains("homography_provenance"))
    p = provenance_from_string(j["homography_provenance"].get<std::string>());
  b.true_homography = Homography(matrix(j["homography"], "homography"), p);
  return b;
}

}  // namespace json_io

inline void save_detections(const std::filesystem::path& path, const std::vector<Detection>& ds) {
  json_io::write_file(path, json_io::detections(ds));
}

inline void save_annotation(const std::filesystem::path& path, const AnnotationBundle& b) {
  json_io::write_file(path, json_io::bundle(b));
}

inline AnnotationBundle load_annotation(const std::filesystem::path& path) {
  return json_io::bundle(json_io::read_file(path));
}

}  // namespace audiogram
