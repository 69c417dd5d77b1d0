// SPDX-License-Identifier: Apache-2.0
//
// Sample manifest: one JSON object per line describing a structure, its
// per-chain embeddings, roles, CDR sidecar, labels and split.

#ifndef IGPOSE_MANIFEST_HPP_
#define IGPOSE_MANIFEST_HPP_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "igpose/structio.hpp"

namespace igpose {

struct SampleRecord {
  std::string id;
  std::string structure_path;  // PDB file or serialized graph (.igg)
  std::map<std::string, std::string> embedding_paths;  // chain -> file
  structio::RoleMap role_map;
  std::string cdr_annotation_path;  // empty: heuristic windows
  std::optional<int> label;
  std::optional<double> dockq;
  std::string cluster_id;
  std::string split;  // train | validation | test, empty if unassigned

  void validate() const;
};

std::string record_to_json(const SampleRecord& r);
SampleRecord record_from_json(std::string_view line);

// Relative paths inside records are resolved against the manifest's
// directory when read.
std::vector<SampleRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<SampleRecord>& records);

} // namespace igpose

#endif
