// SPDX-License-Identifier: Apache-2.0

#include "igpose/manifest.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "igpose/error.hpp"

namespace igpose {

namespace fs = std::filesystem;

void SampleRecord::validate() const {
  if (id.empty())
    fail(ErrorKind::validation, "manifest record without id");
  if (structure_path.empty())
    fail(ErrorKind::validation, "record " + id + ": missing structure_path");
  if (label && *label != 0 && *label != 1)
    fail(ErrorKind::validation, "record " + id + ": label must be 0 or 1");
  if (dockq && !(*dockq >= 0 && *dockq <= 1))
    fail(ErrorKind::validation, "record " + id + ": dockq outside [0, 1]");
  if (!split.empty() && split != "train" && split != "validation" && split != "test")
    fail(ErrorKind::validation, "record " + id + ": unknown split '" + split + "'");
}

std::string record_to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["structure_path"] = r.structure_path;
  nlohmann::ordered_json emb = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.embedding_paths)
    emb[k] = v;
  j["embedding_paths"] = emb;
  nlohmann::ordered_json roles = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.role_map)
    roles[k] = structio::to_string(v);
  j["role_map"] = roles;
  j["cdr_annotation_path"] = r.cdr_annotation_path;
  j["label"] = r.label ? nlohmann::ordered_json(*r.label) : nullptr;
  j["dockq"] = r.dockq ? nlohmann::ordered_json(*r.dockq) : nullptr;
  j["cluster_id"] = r.cluster_id;
  j["split"] = r.split;
  return j.dump();
}

SampleRecord record_from_json(std::string_view line) {
  SampleRecord r;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    r.id = j.at("id").get<std::string>();
    r.structure_path = j.at("structure_path").get<std::string>();
    if (j.contains("embedding_paths") && !j["embedding_paths"].is_null())
      r.embedding_paths = j["embedding_paths"].get<std::map<std::string, std::string>>();
    if (j.contains("role_map") && !j["role_map"].is_null())
      for (const auto& [k, v] : j["role_map"].items())
        r.role_map[k] = structio::parse_role(v.get<std::string>());
    r.cdr_annotation_path = j.value("cdr_annotation_path", "");
    if (j.contains("label") && !j["label"].is_null())
      r.label = j["label"].get<int>();
    if (j.contains("dockq") && !j["dockq"].is_null())
      r.dockq = j["dockq"].get<double>();
    r.cluster_id = j.value("cluster_id", "");
    r.split = j.value("split", "");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("manifest record: ") + e.what());
  }
  r.validate();
  return r;
}

std::vector<SampleRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::io, "cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative())
      p = (base / p).lexically_normal().string();
  };
  std::vector<SampleRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      SampleRecord r = record_from_json(line);
      resolve(r.structure_path);
      resolve(r.cdr_annotation_path);
      for (auto& [chain, p] : r.embedding_paths)
        resolve(p);
      out.push_back(std::move(r));
    } catch (const Error& e) {
      fail(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<SampleRecord>& records) {
  std::ofstream out(path);
  if (!out)
    fail(ErrorKind::io, "cannot write manifest " + path);
  for (const auto& r : records)
    out << record_to_json(r) << '\n';
  if (!out)
    fail(ErrorKind::io, "failed writing manifest " + path);
}

} // namespace igpose
